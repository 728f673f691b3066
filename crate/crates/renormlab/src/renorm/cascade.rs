use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{find_period2, pointwise_renormalize, scalings, ZoomSearch};
use crate::error::{Error, Result};
use crate::map::{pt, ChainMap, GenFunMap, Mat2, PlaneMap};
use crate::symfun::{newton_bracketed, BivariatePoly, DomainBox, NewtonOptions};

/// A one-parameter family of maps.
pub trait Family: Send + Sync {
    fn member(&self, a: f64) -> Result<GenFunMap>;
    /// Parameter interval searched for the cascade.
    fn range(&self) -> (f64, f64);
}

/// Kicked family with potential `V(y) = (a/2) y^2 - y^3/3`:
/// `S_a(x, y) = (1 + a)/2 (x^2 + y^2) - x y - (x^3 + y^3)/3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KickedFamily {
    pub domain: DomainBox,
    pub solve_tol: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for KickedFamily {
    fn default() -> Self {
        Self {
            domain: DomainBox { x_lo: -1.0, x_hi: 0.75, u_lo: -1.6, u_hi: 2.4 },
            solve_tol: 1e-13,
            a_min: -2.5,
            a_max: -1.5,
        }
    }
}

impl KickedFamily {
    pub fn genfun(a: f64) -> BivariatePoly {
        let c2 = 0.5 + 0.5 * a;
        BivariatePoly::from_terms(
            3,
            true,
            &[((2, 0), c2), ((1, 1), -1.0), ((3, 0), -1.0 / 3.0)],
        )
        .expect("fixed degree-3 table")
    }
}

impl Family for KickedFamily {
    fn member(&self, a: f64) -> Result<GenFunMap> {
        GenFunMap::new(Self::genfun(a), self.domain, self.solve_tol)
    }

    fn range(&self) -> (f64, f64) {
        (self.a_min, self.a_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    /// Last bifurcation index computed.
    pub levels: usize,
    pub width_tol: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self { levels: 8, width_tol: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeLevel {
    pub n: usize,
    pub a_n: f64,
    /// `a_{n-1} - a_n`.
    pub width: Option<f64>,
    /// `(a_{n-1} - a_{n-2}) / (a_n - a_{n-1})`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeTable {
    pub levels: Vec<CascadeLevel>,
    /// Aitken extrapolation from the last two widths.
    pub a_inf: Option<f64>,
}

fn trace_at_period2<M: PlaneMap + ?Sized>(f: &M, zoom: &ZoomSearch) -> Result<f64> {
    let p2 = find_period2(f, zoom.p_lo, zoom.p_hi, zoom.samples, zoom.hint)?;
    let (w, j1) = f.apply_jac(pt(p2.p, 0.0))?;
    let j2 = f.jacobian(w)?;
    Ok((j2 * j1).trace())
}

/// `trace D(R^m F_a)^2 + 2` at the period-2 point, with a pointwise tower.
fn level_trace(family: &dyn Family, a: f64, m: usize, zoom: &ZoomSearch) -> Result<f64> {
    let f = family.member(a)?;
    let mut chain = ChainMap::single(Arc::new(f));
    let mut z = *zoom;
    for _ in 0..m {
        let (s, o) = scalings(&chain, &z)?;
        z = zoom.with_hint(o.next_p(&s));
        chain = pointwise_renormalize(&chain, &s);
    }
    Ok(trace_at_period2(&chain, &z)? + 2.0)
}

fn bisect<G: FnMut(f64) -> Result<f64>>(mut g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut ga = g(a)?;
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Parameters `a_n` where the period-`2^n` orbit on the symmetry line
/// period-doubles, found by bisection level by level.
pub fn cascade_bisection(family: &dyn Family, cfg: &CascadeConfig, zoom: &ZoomSearch) -> Result<CascadeTable> {
    let (a_min, a_max) = family.range();
    let origin_trace = |a: f64| -> Result<f64> {
        let f = family.member(a)?;
        Ok(f.jacobian(pt(0.0, 0.0))?.trace() + 2.0)
    };
    let opts = NewtonOptions { tol: 1e-15, max_iter: 200, deriv_floor: 0.0 };
    let g1 = |a: f64| match origin_trace(a) {
        Ok(v) => (v, f64::NAN),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let a1 = newton_bracketed(g1, a_min, a_max, &opts).map_err(|_| Error::CascadeLost { level: 1 })?;
    let mut a_vals = vec![a1];
    for n in 2..=cfg.levels {
        let prev = a_vals[n - 2];
        let gap = if n == 2 { prev - a_min } else { a_vals[n - 3] - prev };
        let g = |a: f64| level_trace(family, a, n - 2, zoom);
        let near = prev - 1e-4 * gap;
        let mut cands: Vec<f64> = [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|f| prev - f * gap)
            .collect();
        cands.insert(0, near);
        let mut bracket = None;
        let mut last: Option<(f64, f64)> = None;
        for a in cands {
            let Ok(v) = g(a) else { continue };
            if let Some((la, lv)) = last {
                if lv.signum() != v.signum() {
                    bracket = Some((a, la));
                    break;
                }
            }
            last = Some((a, v));
        }
        let (lo, hi) = bracket.ok_or(Error::CascadeLost { level: n })?;
        let a_n = bisect(g, lo, hi, cfg.width_tol).map_err(|_| Error::CascadeLost { level: n })?;
        a_vals.push(a_n);
    }
    let levels: Vec<CascadeLevel> = a_vals
        .iter()
        .enumerate()
        .map(|(k, &a_n)| {
            let width = (k >= 1).then(|| a_vals[k - 1] - a_n);
            let ratio = (k >= 2).then(|| (a_vals[k - 2] - a_vals[k - 1]) / (a_vals[k - 1] - a_n));
            CascadeLevel { n: k + 1, a_n, width, ratio }
        })
        .collect();
    let a_inf = match levels.as_slice() {
        [.., prev, last] => last.ratio.map(|d| last.a_n + (last.a_n - prev.a_n) / (d - 1.0)),
        _ => None,
    };
    Ok(CascadeTable { levels, a_inf })
}

/// Orbit geometry of one level, measured in the original coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryLevel {
    pub k: usize,
    /// Period-`2^{k+1}` point on the axis that the level zooms into.
    pub z: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub width: f64,
    /// `d_u pi_x F^{2^{k+1}}(z, 0)`.
    pub twist: f64,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
}

fn power_axis<M: PlaneMap + ?Sized>(f: &M, n: usize, x: f64) -> Result<(f64, Mat2)> {
    let mut z = pt(x, 0.0);
    let mut j = Mat2::identity();
    for _ in 0..n {
        let (w, jw) = f.apply_jac(z)?;
        z = w;
        j = jw * j;
    }
    Ok((z.y, j))
}

fn adjacent_root<M: PlaneMap + ?Sized>(f: &M, n: usize, z: f64, reach: f64, side: f64) -> Result<f64> {
    let h = |x: f64| power_axis(f, n, x).map(|(v, _)| v);
    let mut prev_x = z + side * reach * 2f64.powi(-30);
    let mut prev = h(prev_x)?;
    let mut d = reach * 2f64.powi(-30);
    while d < reach {
        d = (d * 1.25).min(reach);
        let x = z + side * d;
        let Ok(v) = h(x) else { break };
        if v == 0.0 || v.signum() != prev.signum() {
            let g = |t: f64| match power_axis(f, n, t) {
                Ok((v, j)) => (v, j[(1, 0)]),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let opts = NewtonOptions { tol: 1e-15, max_iter: 200, deriv_floor: 1e-300 };
            return newton_bracketed(g, prev_x.min(x), prev_x.max(x), &opts).map_err(|_| Error::NoPeriod4);
        }
        prev = v;
        prev_x = x;
    }
    Err(Error::NoPeriod4)
}

/// Scaling ratios read off the nested on-axis orbits of `f` directly,
/// without any renormalization.
pub fn orbit_geometry<M: PlaneMap + ?Sized>(f: &M, levels: usize, zoom: &ZoomSearch) -> Result<Vec<GeometryLevel>> {
    let p2 = find_period2(f, zoom.p_lo, zoom.p_hi, zoom.samples, zoom.hint)?;
    let mut z = p2.p;
    let mut reach = 0.45 * (p2.q - p2.p).abs();
    let mut out: Vec<GeometryLevel> = Vec::with_capacity(levels);
    for k in 0..levels {
        let n = 1usize << (k + 1);
        // `lambda < 0` flips the orientation of every level.
        let side = if k % 2 == 0 { 1.0 } else { -1.0 };
        let x_right = adjacent_root(f, n, z, reach, side)?;
        let x_left = adjacent_root(f, n, z, reach, -side)?;
        let width = x_left - x_right;
        let (_, j) = power_axis(f, n, z)?;
        let twist = j[(0, 1)];
        let (lambda, mu) = match out.last() {
            Some(prev) => {
                let l = width / prev.width;
                (Some(l), Some(l * prev.twist / twist))
            }
            None => (None, None),
        };
        out.push(GeometryLevel { k, z, x_left, x_right, width, twist, lambda, mu });
        reach = 0.45 * width.abs();
        z = x_right;
    }
    Ok(out)
}
