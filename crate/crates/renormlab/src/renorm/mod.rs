//! The renormalization operator `RF = Lambda^{-1} o F o F o Lambda`, the orbit
//! data behind `Lambda`, and the sampled C^2 distance.

mod cascade;
mod fixed;
mod tower;

pub use cascade::{
    cascade_bisection, orbit_geometry, CascadeConfig, CascadeLevel, CascadeTable, Family,
    GeometryLevel, KickedFamily,
};
pub use fixed::{
    coeff_jacobian, dr_spectrum, newton_fixed_point, real_eigenvector, FixedPoint, NewtonConfig,
    Spectrum,
};
pub use tower::{RenormTower, Tail};

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{pt, ChainMap, GenFunMap, Mat2, PlaneMap, Point, Stage};
use crate::symfun::{
    chebyshev_nodes, newton_bracketed, newton_scalar, Basis, BivariatePoly, DomainBox,
    Functional, LeastSquares, NewtonOptions,
};

/// Parameters of `Lambda(x, u) = (lambda x + p, mu u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalings {
    pub p: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// On-axis orbit data that fixes the scalings: the period-2 pair `p < 0 < q`,
/// the on-axis period-4 points `x_left < p < x_right` and the twist
/// `d_u pi_x F^2(p, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomOrbit {
    pub p: f64,
    pub q: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub twist: f64,
}

impl ZoomOrbit {
    /// Position of the period-2 point of `RF` in rescaled coordinates.
    pub fn next_p(&self, s: &Scalings) -> f64 {
        (self.x_right - s.p) / s.lambda
    }
}

/// The period-2 pair on the symmetry line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Period2 {
    pub p: f64,
    pub q: f64,
}

/// Where to look for the period-2 point and its period-4 neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoomSearch {
    pub p_lo: f64,
    pub p_hi: f64,
    pub hint: Option<f64>,
    /// Half-window for the period-4 search, as a fraction of `q - p`.
    pub window: f64,
    pub samples: usize,
}

impl Default for ZoomSearch {
    fn default() -> Self {
        Self { p_lo: -0.95, p_hi: -1e-5, hint: None, window: 0.45, samples: 160 }
    }
}

impl ZoomSearch {
    pub fn with_hint(mut self, hint: f64) -> Self {
        self.hint = Some(hint);
        self
    }
}

const AXIS_TOL: f64 = 1e-12;
const FIXED_TOL: f64 = 1e-9;

fn axis_root<M: PlaneMap + ?Sized>(f: &M, lo: f64, hi: f64) -> Result<f64> {
    let g = |x: f64| match f.apply_jac(pt(x, 0.0)) {
        Ok((w, j)) => (w.y, j[(1, 0)]),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let opts = NewtonOptions { tol: AXIS_TOL, max_iter: 100, deriv_floor: 1e-300 };
    newton_bracketed(g, lo, hi, &opts)
}

/// Finds `(p, 0)` with `pi_u F(p, 0) = 0` and `F(p, 0) != (p, 0)` in
/// `[lo, hi]`; the candidate nearest `hint` wins.
pub fn find_period2<M: PlaneMap + ?Sized>(
    f: &M,
    lo: f64,
    hi: f64,
    samples: usize,
    hint: Option<f64>,
) -> Result<Period2> {
    let n = samples.max(8);
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let vals: Vec<Option<Point>> = xs.iter().map(|&x| f.apply(pt(x, 0.0)).ok()).collect();
    let mut roots = Vec::new();
    for k in 0..n {
        let (Some(a), Some(b)) = (vals[k], vals[k + 1]) else { continue };
        if a.y == 0.0 {
            roots.push(xs[k]);
        } else if a.y.signum() != b.y.signum() && b.y != 0.0 {
            if let Ok(r) = axis_root(f, xs[k], xs[k + 1]) {
                roots.push(r);
            }
        }
    }
    if let Some(b) = vals[n] {
        if b.y == 0.0 {
            roots.push(xs[n]);
        }
    }
    if roots.is_empty() {
        return Err(Error::NoPeriod2);
    }
    let mut best: Option<Period2> = None;
    let mut degenerate = None;
    for r in roots {
        let w = f.apply(pt(r, 0.0))?;
        if (w.x - r).abs() <= FIXED_TOL {
            degenerate.get_or_insert(r);
            continue;
        }
        let cand = Period2 { p: r, q: w.x };
        best = match (best, hint) {
            (None, _) => Some(cand),
            (Some(b), Some(h)) if (r - h).abs() < (b.p - h).abs() => Some(cand),
            (b, _) => b,
        };
    }
    match (best, degenerate) {
        (Some(b), _) => Ok(b),
        (None, Some(p)) => Err(Error::DegenerateOrbit { p }),
        (None, None) => Err(Error::NoPeriod2),
    }
}

fn square_axis<M: PlaneMap + ?Sized>(f: &M, x: f64) -> Result<(Point, Mat2)> {
    let (w, j1) = f.apply_jac(pt(x, 0.0))?;
    let (v, j2) = f.apply_jac(w)?;
    Ok((v, j2 * j1))
}

/// First root of `pi_u F^2(x, 0)` moving away from `p` in direction `side`.
fn period4_root<M: PlaneMap + ?Sized>(f: &M, p: f64, reach: f64, side: f64, samples: usize) -> Result<f64> {
    let h = |x: f64| square_axis(f, x).map(|(v, _)| v.y).ok();
    let mut prev_x = p + side * reach / samples as f64;
    let mut prev = h(prev_x).ok_or(Error::NoPeriod4)?;
    for k in 2..=samples {
        let x = p + side * reach * k as f64 / samples as f64;
        let Some(v) = h(x) else { break };
        if v == 0.0 || v.signum() != prev.signum() {
            let g = |t: f64| match square_axis(f, t) {
                Ok((w, j)) => (w.y, j[(1, 0)]),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let opts = NewtonOptions { tol: AXIS_TOL, max_iter: 100, deriv_floor: 1e-300 };
            return newton_bracketed(g, prev_x.min(x), prev_x.max(x), &opts)
                .map_err(|_| Error::NoPeriod4);
        }
        prev = v;
        prev_x = x;
    }
    Err(Error::NoPeriod4)
}

/// Scalings of `F`: `p` the period-2 point, `lambda = x_left - x_right` from
/// the adjacent on-axis period-4 points, `mu = lambda / d_u pi_x F^2(p, 0)`.
pub fn scalings<M: PlaneMap + ?Sized>(f: &M, zoom: &ZoomSearch) -> Result<(Scalings, ZoomOrbit)> {
    let Period2 { p, q } = find_period2(f, zoom.p_lo, zoom.p_hi, zoom.samples, zoom.hint)?;
    let reach = zoom.window * (q - p).abs();
    let x_right = period4_root(f, p, reach, 1.0, zoom.samples)?;
    let x_left = period4_root(f, p, reach, -1.0, zoom.samples)?;
    let (img, _) = square_axis(f, x_right)?;
    // Deep pointwise levels carry about 1e-6 of rounding here; a wrong pair is off by O(|q - p|).
    let pair_tol = 1e-5 * (1.0 + (q - p).abs());
    if (img.x - x_left).abs() > pair_tol {
        return Err(Error::NoPeriod4);
    }
    let (_, j) = square_axis(f, p)?;
    let twist = j[(0, 1)];
    if !(twist.abs() > 1e-10) {
        return Err(Error::TwistDegenerate { m12: twist });
    }
    let lambda = x_left - x_right;
    let mu = lambda / twist;
    if !(lambda < 0.0 && mu > 0.0) {
        return Err(Error::WrongSign { lambda, mu });
    }
    Ok((Scalings { p, lambda, mu }, ZoomOrbit { p, q, x_left, x_right, twist }))
}

/// Midpoint data of the two-step generating function
/// `S2(x, x'') = S(x, X) + S(X, x'')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Midpoint {
    pub x_mid: f64,
    /// `d1 S(x, X)`, equal to `d1 S2(x, x'')`.
    pub d1: f64,
    /// `d2 S(X, x'')`, equal to `d2 S2(x, x'')`.
    pub d2: f64,
}

const MIDPOINT_FLOOR: f64 = 1e-10;

/// Solves `d2 S(x, X) + d1 S(X, x'') = 0` for `X`.
pub fn square_midpoint(
    s: &BivariatePoly,
    x: f64,
    x2: f64,
    seed: f64,
    range: (f64, f64),
) -> Result<Midpoint> {
    let g = |t: f64| {
        (
            s.partial(x, t, 0, 1) + s.partial(t, x2, 1, 0),
            s.partial(x, t, 0, 2) + s.partial(t, x2, 2, 0),
        )
    };
    let opts = NewtonOptions { tol: 1e-14, max_iter: 40, deriv_floor: MIDPOINT_FLOOR };
    let x_mid = match newton_scalar(g, seed, &opts) {
        Ok(t) if t >= range.0 && t <= range.1 => t,
        Err(Error::DerivativeVanishes { .. }) => return Err(Error::TwistLoss { x, x2 }),
        _ => newton_bracketed(g, range.0, range.1, &opts)
            .map_err(|_| Error::MidpointSolveFailed { x, x2 })?,
    };
    if g(x_mid).1.abs() < MIDPOINT_FLOOR {
        return Err(Error::TwistLoss { x, x2 });
    }
    Ok(Midpoint { x_mid, d1: s.partial(x, x_mid, 1, 0), d2: s.partial(x_mid, x2, 0, 1) })
}

/// Settings of the generating-function renormalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormConfig {
    pub degree: usize,
    /// Chebyshev nodes per axis of the fit grid.
    pub fit_nodes: usize,
    pub fit_tol: f64,
    pub solve_tol: f64,
    pub domain: DomainBox,
}

impl Default for RenormConfig {
    fn default() -> Self {
        Self {
            degree: 12,
            fit_nodes: 24,
            fit_tol: 1e-7,
            solve_tol: 1e-12,
            domain: DomainBox { x_lo: -1.0, x_hi: 0.75, u_lo: -1.6, u_hi: 2.4 },
        }
    }
}

/// Output of one renormalization step.
#[derive(Clone, Debug)]
pub struct Renormalized {
    pub map: GenFunMap,
    pub scalings: Scalings,
    pub orbit: ZoomOrbit,
    pub residual: f64,
}

impl Renormalized {
    /// Zoom search for the next level, centred on the predicted period-2 point.
    pub fn next_zoom(&self, zoom: &ZoomSearch) -> ZoomSearch {
        zoom.with_hint(self.orbit.next_p(&self.scalings))
    }
}

/// Generating-function renormalization with a cached least-squares factor.
#[derive(Clone, Debug)]
pub struct Renormalizer {
    cfg: RenormConfig,
    basis: Basis,
    nodes: Vec<f64>,
    ls: LeastSquares,
}

impl Renormalizer {
    pub fn new(cfg: RenormConfig) -> Result<Self> {
        let basis = Basis::genfun(cfg.degree);
        let d = cfg.domain;
        let nodes = chebyshev_nodes(cfg.fit_nodes, d.x_lo, d.x_hi);
        let mut rows = Vec::with_capacity(2 * nodes.len() * nodes.len());
        for &a in &nodes {
            for &b in &nodes {
                rows.push(basis.row(Functional::D1, a, b));
                rows.push(basis.row(Functional::D2, a, b));
            }
        }
        let design = DMatrix::from_fn(rows.len(), basis.len(), |r, c| rows[r][c]);
        let ls = LeastSquares::new(design)?;
        Ok(Self { cfg, basis, nodes, ls })
    }

    pub fn config(&self) -> &RenormConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn to_map(&self, coeffs: &[f64]) -> Result<GenFunMap> {
        GenFunMap::new(self.basis.to_poly(coeffs), self.cfg.domain, self.cfg.solve_tol)
    }

    pub fn coeffs(&self, f: &GenFunMap) -> Vec<f64> {
        self.basis.to_vec(f.genfun())
    }

    /// `RF` through the two-step generating function and a refit.
    pub fn renormalize(&self, f: &GenFunMap, zoom: &ZoomSearch) -> Result<Renormalized> {
        let (s, orbit) = scalings(f, zoom)?;
        let (v, residual) = self.fit_rescaled(f.genfun(), &s, orbit.q)?;
        if residual > self.cfg.fit_tol {
            return Err(Error::FitResidualTooLarge { residual, tol: self.cfg.fit_tol });
        }
        let map = self.to_map(&v)?;
        Ok(Renormalized { map, scalings: s, orbit, residual })
    }

    fn fit_rescaled(&self, s: &BivariatePoly, sc: &Scalings, q: f64) -> Result<(Vec<f64>, f64)> {
        let d = self.cfg.domain;
        let margin = 0.1 * d.width();
        let range = (d.x_lo - margin, d.x_hi + margin);
        let rows: Vec<Result<Vec<f64>>> = self
            .nodes
            .par_iter()
            .map(|&a| {
                let x = sc.lambda * a + sc.p;
                let mut seed = q;
                let mut out = Vec::with_capacity(2 * self.nodes.len());
                for &b in &self.nodes {
                    let x2 = sc.lambda * b + sc.p;
                    let m = square_midpoint(s, x, x2, seed, range)?;
                    seed = m.x_mid;
                    out.push(m.d1 / sc.mu);
                    out.push(m.d2 / sc.mu);
                }
                Ok(out)
            })
            .collect();
        let mut rhs = Vec::with_capacity(self.ls.rows());
        for r in rows {
            rhs.extend(r?);
        }
        Ok(self.ls.solve(&rhs))
    }
}

/// `Lambda^{-1} o F o F o Lambda` as a chain, no refit.
pub fn pointwise_renormalize(f: &ChainMap, s: &Scalings) -> ChainMap {
    let mut c = ChainMap::new(vec![Stage::Lambda { scalings: *s }]);
    c = c.then(f).then(f);
    c.push(Stage::LambdaInv { scalings: *s });
    c
}

/// Sampled C^k distance: max over the grid of value, Jacobian and (for
/// `order = 2`) centred-difference second-derivative discrepancies.
pub fn map_distance<A, B>(f: &A, g: &B, grid: &[Point], order: usize) -> Result<f64>
where
    A: PlaneMap + ?Sized,
    B: PlaneMap + ?Sized,
{
    const H: f64 = 1e-4;
    let per_point: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&z| {
            let (fz, jf) = f.apply_jac(z)?;
            let (gz, jg) = g.apply_jac(z)?;
            let mut d = (fz - gz).amax();
            if order >= 1 {
                d = d.max((jf - jg).amax());
            }
            if order >= 2 {
                for e in [pt(H, 0.0), pt(0.0, H)] {
                    let df = f.jacobian(z + e)? - f.jacobian(z - e)?;
                    let dg = g.jacobian(z + e)? - g.jacobian(z - e)?;
                    d = d.max((df - dg).amax() / (2.0 * H));
                }
            }
            Ok(d)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for d in per_point {
        worst = worst.max(d?);
    }
    Ok(worst)
}

/// Wraps a generating-function map as a one-stage chain.
pub fn as_chain(f: &GenFunMap) -> ChainMap {
    ChainMap::single(Arc::new(f.clone()))
}
