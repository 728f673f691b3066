use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{map_distance, Renormalizer, Scalings, ZoomOrbit, ZoomSearch};
use crate::error::{Error, Result};
use crate::map::GenFunMap;
use crate::symfun::BivariatePoly;

/// Newton iteration settings for the fixed-point solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Finite-difference step for the derivative of `R` in coefficients.
    pub dr_step: f64,
    pub max_halvings: usize,
    /// Grid size for the reported `C^2` distance `|RF - F|`.
    pub distance_grid: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { max_iter: 12, tol: 1e-12, dr_step: 1e-6, max_halvings: 8, distance_grid: 12 }
    }
}

/// A converged fixed point of `R`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPoint {
    pub map: GenFunMap,
    pub scalings: Scalings,
    pub orbit: ZoomOrbit,
    /// Max coefficient change `|RF - F|` at the last iterate.
    pub residual: f64,
    /// Sampled `C^2` distance between `RF` and `F` as maps.
    pub distance: f64,
    pub fit_residual: f64,
    pub iterations: usize,
}

fn zoom_for(base: &ZoomSearch, f: &GenFunMap) -> ZoomSearch {
    match super::find_period2(f, base.p_lo, base.p_hi, base.samples, base.hint) {
        Ok(p2) => base.with_hint(p2.p),
        Err(_) => *base,
    }
}

fn residual_vec(r: &Renormalizer, c: &[f64], zoom: &ZoomSearch) -> Result<(Vec<f64>, f64)> {
    let f = r.to_map(c)?;
    let rf = r.renormalize(&f, zoom)?;
    let rc = r.coeffs(&rf.map);
    Ok((rc.iter().zip(c).map(|(a, b)| a - b).collect(), rf.residual))
}

fn amax(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `DR` in coefficient space by central differences; columns run in parallel.
pub fn coeff_jacobian(r: &Renormalizer, c: &[f64], zoom: &ZoomSearch, step: f64) -> Result<DMatrix<f64>> {
    let n = c.len();
    let cols: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let h = step * c[k].abs().max(1.0);
            let eval = |s: f64| -> Result<Vec<f64>> {
                let mut ck = c.to_vec();
                ck[k] += s;
                let f = r.to_map(&ck)?;
                Ok(r.coeffs(&r.renormalize(&f, zoom)?.map))
            };
            let plus = eval(h)?;
            let minus = eval(-h)?;
            Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (k, col) in cols.into_iter().enumerate() {
        let col = col?;
        for (i, v) in col.into_iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    Ok(m)
}

/// Newton's method on `R(c) - c = 0` from `seed`.
pub fn newton_fixed_point(
    r: &Renormalizer,
    seed: &GenFunMap,
    zoom: &ZoomSearch,
    cfg: &NewtonConfig,
) -> Result<FixedPoint> {
    let mut c = r.coeffs(seed);
    let mut z = zoom_for(zoom, seed);
    let (mut g, _) = residual_vec(r, &c, &z)?;
    let mut res = amax(&g);
    let mut iterations = 0;
    while res > cfg.tol && iterations < cfg.max_iter {
        iterations += 1;
        let dr = coeff_jacobian(r, &c, &z, cfg.dr_step)?;
        let jg = dr - DMatrix::identity(c.len(), c.len());
        let step = jg
            .lu()
            .solve(&DVector::from_column_slice(&g))
            .ok_or(Error::JacobianSingular)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            let tz = match r.to_map(&trial) {
                Ok(f) => zoom_for(&z, &f),
                Err(_) => {
                    t *= 0.5;
                    continue;
                }
            };
            if let Ok((tg, _)) = residual_vec(r, &trial, &tz) {
                let tres = amax(&tg);
                if tres < res {
                    c = trial;
                    g = tg;
                    res = tres;
                    z = tz;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if res <= 1e3 * cfg.tol {
                break;
            }
            return Err(Error::NewtonDiverged { residual: res });
        }
    }
    if res > 1e3 * cfg.tol {
        return Err(Error::NoConvergence { iterations });
    }
    let map = r.to_map(&c)?;
    let rf = r.renormalize(&map, &z)?;
    let grid = map.domain_grid(cfg.distance_grid);
    let distance = map_distance(&rf.map, &map, &grid, 2)?;
    Ok(FixedPoint {
        map,
        scalings: rf.scalings,
        orbit: rf.orbit,
        residual: res,
        distance,
        fit_residual: rf.residual,
        iterations,
    })
}

/// Spectral data of `DR` at a fixed point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    /// `(re, im)` pairs sorted by decreasing modulus.
    pub eigenvalues: Vec<(f64, f64)>,
    pub delta: f64,
    /// Rayleigh quotient of the coordinate-change direction.
    pub rho_t: f64,
    /// `|DR v_t - rho_t v_t| / |v_t|`.
    pub vt_residual: f64,
    /// Largest modulus after removing `delta` and `rho_t`.
    pub nu: f64,
    /// Eigenvalue realizing `nu`.
    pub nu_value: (f64, f64),
}

/// Largest residual accepted for the coordinate-change direction.
pub const VT_RESIDUAL_MAX: f64 = 1e-3;

/// Derivative in `t` of the coefficients of `h_t^{-1} F h_t` at `t = 0`.
///
/// The conjugate has generating function `S(h_t x, h_t x')`, so the
/// direction is `x^2 d1 S + x'^2 d2 S`, truncated to the basis degree.
pub fn coordinate_direction(r: &Renormalizer, f: &GenFunMap) -> Vec<f64> {
    let s = f.genfun();
    let d = r.config().degree;
    let mut v = BivariatePoly::zeros(d, true);
    for i in 0..=d {
        for j in i..=d - i {
            let mut c = 0.0;
            if i >= 1 {
                c += (i - 1) as f64 * s.coeff(i - 1, j);
            }
            if j >= 1 {
                c += (j - 1) as f64 * s.coeff(i, j - 1);
            }
            v.set(i, j, c);
        }
    }
    r.basis().to_vec(&v)
}

/// Coefficients of the dilation direction `x d1 S + x' d2 S`.
pub fn dilation_direction(r: &Renormalizer, f: &GenFunMap) -> Vec<f64> {
    let s = f.genfun();
    let d = r.config().degree;
    let mut v = BivariatePoly::zeros(d, true);
    for i in 0..=d {
        for j in i..=d - i {
            v.set(i, j, (i + j) as f64 * s.coeff(i, j));
        }
    }
    r.basis().to_vec(&v)
}

/// Eigenvalues of `DR` at `fp` with the coordinate-change direction removed.
pub fn dr_spectrum(r: &Renormalizer, fp: &FixedPoint, zoom: &ZoomSearch, step: f64) -> Result<(Spectrum, DMatrix<f64>)> {
    let c = r.coeffs(&fp.map);
    let z = zoom.with_hint(fp.scalings.p);
    let dr = coeff_jacobian(r, &c, &z, step)?;
    let ev = dr.complex_eigenvalues();
    let mut eig: Vec<(f64, f64)> = ev.iter().map(|e| (e.re, e.im)).collect();
    eig.sort_by(|a, b| b.0.hypot(b.1).total_cmp(&a.0.hypot(a.1)));
    let vt = DVector::from_vec(coordinate_direction(r, &fp.map));
    let vs = DVector::from_vec(dilation_direction(r, &fp.map));
    let dv = &dr * &vt;
    // The renormalized coordinate change is `h_{rho t}` up to a dilation and
    // a rescaling of `S`; both lie in the kernel of `DR`.
    let vc = DVector::from_vec(c.clone());
    let pair = DMatrix::from_columns(&[vt.clone(), vs, vc]);
    let coef = pair
        .clone()
        .svd(true, true)
        .solve(&dv, 1e-14)
        .map_err(|_| Error::JacobianSingular)?;
    let rho_t = coef[0];
    let vt_residual = (&dv - &pair * &coef).norm() / vt.norm();
    if !(vt_residual <= VT_RESIDUAL_MAX) {
        return Err(Error::IllConditioned { residual: vt_residual });
    }
    let delta = eig[0].0;
    let mut rest: Vec<(f64, f64)> = eig[1..].to_vec();
    if let Some(k) = rest
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1 .0 - rho_t).hypot(a.1 .1);
            let db = (b.1 .0 - rho_t).hypot(b.1 .1);
            da.total_cmp(&db)
        })
        .map(|(k, _)| k)
    {
        rest.remove(k);
    }
    let nu_value = rest.first().copied().unwrap_or((0.0, 0.0));
    let nu = nu_value.0.hypot(nu_value.1);
    Ok((Spectrum { eigenvalues: eig, delta, rho_t, vt_residual, nu, nu_value }, dr))
}

/// Unit eigenvector of `m` for the real eigenvalue `value`, by inverse
/// iteration with a slightly shifted pole.
pub fn real_eigenvector(m: &DMatrix<f64>, value: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    let shift = value + 1e-9 * value.abs().max(1e-3);
    let lu = (m - DMatrix::identity(n, n) * shift).lu();
    let mut v = DVector::from_fn(n, |i, _| 1.0 / (1.0 + i as f64));
    for _ in 0..8 {
        let w = lu.solve(&v).ok_or(Error::JacobianSingular)?;
        let nrm = w.norm();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::JacobianSingular);
        }
        v = w / nrm;
    }
    let k = v.iamax();
    if v[k] < 0.0 {
        v = -v;
    }
    let res = (m * &v - &v * value).norm();
    if res > 1e-6 * value.abs().max(1.0) {
        return Err(Error::IllConditioned { residual: res });
    }
    Ok(v)
}
