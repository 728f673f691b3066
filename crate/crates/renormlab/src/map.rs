//! Reversible area-preserving twist maps: generating-function maps, the
//! reversor, affine rescalings, the coordinate change `h_t` and composition
//! chains.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renorm::Scalings;
use crate::symfun::{
    chebyshev_nodes, newton_bracketed, newton_scalar, Basis, BivariatePoly, DomainBox,
    Functional, NewtonOptions, Relation,
};

pub type Point = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

pub fn pt(x: f64, u: f64) -> Point {
    Point::new(x, u)
}

/// The reversor `T(x, u) = (x, -u)`.
pub fn reverse(z: Point) -> Point {
    Point::new(z.x, -z.y)
}

const T_MAT: Mat2 = Matrix2::new(1.0, 0.0, 0.0, -1.0);

/// An evaluatable map of the plane with Jacobian.
pub trait PlaneMap: Send + Sync {
    fn apply_jac(&self, z: Point) -> Result<(Point, Mat2)>;

    fn apply(&self, z: Point) -> Result<Point> {
        Ok(self.apply_jac(z)?.0)
    }

    fn jacobian(&self, z: Point) -> Result<Mat2> {
        Ok(self.apply_jac(z)?.1)
    }
}

/// A plane map whose inverse is available without a 2-D solve.
pub trait Invertible: PlaneMap {
    fn inverse_apply_jac(&self, z: Point) -> Result<(Point, Mat2)>;

    fn inverse_apply(&self, z: Point) -> Result<Point> {
        Ok(self.inverse_apply_jac(z)?.0)
    }
}

impl<M: PlaneMap + ?Sized> PlaneMap for Arc<M> {
    fn apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        (**self).apply_jac(z)
    }

    fn apply(&self, z: Point) -> Result<Point> {
        (**self).apply(z)
    }
}

impl<M: PlaneMap + ?Sized> PlaneMap for &M {
    fn apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        (**self).apply_jac(z)
    }

    fn apply(&self, z: Point) -> Result<Point> {
        (**self).apply(z)
    }
}

/// Map defined by a symmetric generating function `S(x, x')` through
/// `u = -d1 S(x, x')`, `u' = d2 S(x, x')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenFunMap")]
pub struct GenFunMap {
    genfun: BivariatePoly,
    domain: DomainBox,
    solve_tol: f64,
    twist_sign: f64,
}

#[derive(Deserialize)]
struct RawGenFunMap {
    genfun: BivariatePoly,
    domain: DomainBox,
    solve_tol: f64,
    twist_sign: f64,
}

impl TryFrom<RawGenFunMap> for GenFunMap {
    type Error = Error;

    fn try_from(raw: RawGenFunMap) -> Result<Self> {
        let map = GenFunMap::new(raw.genfun, raw.domain, raw.solve_tol)?;
        if map.twist_sign != raw.twist_sign {
            return Err(Error::NotInClass("stored twist sign disagrees".into()));
        }
        Ok(map)
    }
}

impl GenFunMap {
    pub const TWIST_FLOOR: f64 = 1e-6;
    const TWIST_SAMPLES: usize = 9;

    /// Validates symmetry, `F(0,0) = (0,0)` and the twist condition over the
    /// `x` range of the domain.
    pub fn new(genfun: BivariatePoly, domain: DomainBox, solve_tol: f64) -> Result<Self> {
        if !genfun.is_symmetric() {
            return Err(Error::NotInClass("generating function is not symmetric".into()));
        }
        if !(solve_tol > 0.0) {
            return Err(Error::NotInClass("solve tolerance must be positive".into()));
        }
        if genfun.coeff(1, 0).abs() > solve_tol {
            return Err(Error::NotInClass("d1 S(0,0) != 0, origin not fixed".into()));
        }
        let nodes = chebyshev_nodes(Self::TWIST_SAMPLES, domain.x_lo, domain.x_hi);
        let mut sign = 0.0;
        for &a in &nodes {
            for &b in &nodes {
                let s12 = genfun.partial(a, b, 1, 1);
                if s12.abs() < Self::TWIST_FLOOR {
                    return Err(Error::NotInClass(format!("twist vanishes near ({a:.3}, {b:.3})")));
                }
                if sign == 0.0 {
                    sign = s12.signum();
                } else if s12.signum() != sign {
                    return Err(Error::NotInClass("twist changes sign on the domain".into()));
                }
            }
        }
        Ok(Self { genfun, domain, solve_tol, twist_sign: sign })
    }

    pub fn genfun(&self) -> &BivariatePoly {
        &self.genfun
    }

    pub fn domain(&self) -> DomainBox {
        self.domain
    }

    pub fn solve_tol(&self) -> f64 {
        self.solve_tol
    }

    pub fn twist_sign(&self) -> f64 {
        self.twist_sign
    }

    fn solve_range(&self) -> (f64, f64) {
        let m = 0.1 * self.domain.width();
        (self.domain.x_lo - m, self.domain.x_hi + m)
    }

    /// Solves `-d1 S(x, x') = u` for `x'`, starting from `seed` (default `x`).
    pub fn solve_next_x(&self, x: f64, u: f64, seed: Option<f64>) -> Result<f64> {
        let s = &self.genfun;
        let g = |t: f64| (-s.partial(x, t, 1, 0) - u, -s.partial(x, t, 1, 1));
        let opts = NewtonOptions { tol: self.solve_tol, max_iter: 40, deriv_floor: 1e-12 };
        let (lo, hi) = self.solve_range();
        if let Ok(t) = newton_scalar(g, seed.unwrap_or(x), &opts) {
            if t >= lo && t <= hi {
                return Ok(t);
            }
        }
        let inner = (self.domain.x_lo, self.domain.x_hi);
        newton_bracketed(g, inner.0, inner.1, &opts)
            .or_else(|_| newton_bracketed(g, lo, hi, &opts))
            .map_err(|_| Error::ImplicitSolveFailed { x, u })
    }

    pub fn apply_seeded(&self, z: Point, seed: Option<f64>) -> Result<Point> {
        let x1 = self.solve_next_x(z.x, z.y, seed)?;
        Ok(pt(x1, self.genfun.partial(z.x, x1, 0, 1)))
    }

    fn jac_at(&self, x: f64, x1: f64) -> Mat2 {
        let s11 = self.genfun.partial(x, x1, 2, 0);
        let s12 = self.genfun.partial(x, x1, 1, 1);
        let s22 = self.genfun.partial(x, x1, 0, 2);
        Mat2::new(-s11 / s12, -1.0 / s12, s12 - s22 * s11 / s12, -s22 / s12)
    }

    /// Phase-space points `(x, -d1 S(x, x'))` for an `n` by `n` uniform grid
    /// of `(x, x')` over the domain's `x` range; every point is evaluable.
    pub fn domain_grid(&self, n: usize) -> Vec<Point> {
        let b = self.domain;
        let xs: Vec<f64> = (0..n)
            .map(|k| b.x_lo + b.width() * k as f64 / (n.max(2) - 1) as f64)
            .collect();
        let mut out = Vec::with_capacity(n * n);
        for &x in &xs {
            for &x1 in &xs {
                out.push(pt(x, -self.genfun.partial(x, x1, 1, 0)));
            }
        }
        out
    }
}

impl PlaneMap for GenFunMap {
    fn apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        let x1 = self.solve_next_x(z.x, z.y, None)?;
        let u1 = self.genfun.partial(z.x, x1, 0, 1);
        Ok((pt(x1, u1), self.jac_at(z.x, x1)))
    }

    fn apply(&self, z: Point) -> Result<Point> {
        self.apply_seeded(z, None)
    }
}

impl Invertible for GenFunMap {
    fn inverse_apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        let (w, j) = self.apply_jac(reverse(z))?;
        Ok((reverse(w), T_MAT * j * T_MAT))
    }
}

/// The coordinate change `h_t(x, u) = (x + t x^2, u / (1 + 2 t x))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateChange {
    pub t: f64,
}

impl CoordinateChange {
    pub fn new(t: f64) -> Self {
        Self { t }
    }

    fn factor(&self, x: f64) -> Result<f64> {
        let f = 1.0 + 2.0 * self.t * x;
        if f > 0.0 {
            Ok(f)
        } else {
            Err(Error::SingularChange { x })
        }
    }

    fn jac_at(&self, u: f64, f: f64) -> Mat2 {
        Mat2::new(f, 0.0, -2.0 * self.t * u / (f * f), 1.0 / f)
    }

    /// Preimage `x` of `X = x + t x^2` on the branch through the origin.
    pub fn inverse_x(&self, xx: f64) -> Result<f64> {
        let disc = 1.0 + 4.0 * self.t * xx;
        if !(disc > 0.0) {
            return Err(Error::SingularChange { x: xx });
        }
        Ok(2.0 * xx / (1.0 + disc.sqrt()))
    }
}

impl PlaneMap for CoordinateChange {
    fn apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        let f = self.factor(z.x)?;
        let w = pt(z.x + self.t * z.x * z.x, z.y / f);
        Ok((w, self.jac_at(z.y, f)))
    }
}

impl Invertible for CoordinateChange {
    fn inverse_apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        let x = self.inverse_x(z.x)?;
        let f = self.factor(x)?;
        let u = z.y * f;
        let j = self.jac_at(u, f);
        Ok((pt(x, u), Mat2::new(j[(1, 1)], 0.0, -j[(1, 0)], j[(0, 0)])))
    }
}

impl Scalings {
    /// `Lambda(x, u) = (lambda x + p, mu u)`.
    pub fn lambda_apply(&self, z: Point) -> Point {
        pt(self.lambda * z.x + self.p, self.mu * z.y)
    }

    pub fn lambda_inverse(&self, z: Point) -> Point {
        pt((z.x - self.p) / self.lambda, z.y / self.mu)
    }

    pub fn lambda_jac(&self) -> Mat2 {
        Mat2::new(self.lambda, 0.0, 0.0, self.mu)
    }

    pub fn lambda_inv_jac(&self) -> Mat2 {
        Mat2::new(1.0 / self.lambda, 0.0, 0.0, 1.0 / self.mu)
    }
}

/// One stage of a composition chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    Genfun { map: Arc<GenFunMap> },
    Inverse { map: Arc<GenFunMap> },
    Lambda { scalings: Scalings },
    LambdaInv { scalings: Scalings },
    Ht { t: f64 },
    HtInv { t: f64 },
}

impl Stage {
    pub fn apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        match self {
            Stage::Genfun { map } => map.apply_jac(z),
            Stage::Inverse { map } => map.inverse_apply_jac(z),
            Stage::Lambda { scalings } => Ok((scalings.lambda_apply(z), scalings.lambda_jac())),
            Stage::LambdaInv { scalings } => {
                Ok((scalings.lambda_inverse(z), scalings.lambda_inv_jac()))
            }
            Stage::Ht { t } => CoordinateChange::new(*t).apply_jac(z),
            Stage::HtInv { t } => CoordinateChange::new(*t).inverse_apply_jac(z),
        }
    }

    pub fn apply(&self, z: Point) -> Result<Point> {
        match self {
            Stage::Genfun { map } => map.apply(z),
            Stage::Inverse { map } => Ok(reverse(map.apply(reverse(z))?)),
            Stage::Lambda { scalings } => Ok(scalings.lambda_apply(z)),
            Stage::LambdaInv { scalings } => Ok(scalings.lambda_inverse(z)),
            _ => Ok(self.apply_jac(z)?.0),
        }
    }

    pub fn inverse(&self) -> Stage {
        match self {
            Stage::Genfun { map } => Stage::Inverse { map: map.clone() },
            Stage::Inverse { map } => Stage::Genfun { map: map.clone() },
            Stage::Lambda { scalings } => Stage::LambdaInv { scalings: *scalings },
            Stage::LambdaInv { scalings } => Stage::Lambda { scalings: *scalings },
            Stage::Ht { t } => Stage::HtInv { t: *t },
            Stage::HtInv { t } => Stage::Ht { t: *t },
        }
    }
}

/// Composition of stages, listed in the order they are applied: the first
/// stage acts first.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ChainMap {
    stages: Vec<Stage>,
}

impl ChainMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    pub fn single(map: Arc<GenFunMap>) -> Self {
        Self { stages: vec![Stage::Genfun { map }] }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn push(&mut self, stage: Stage) {
        self.stages.push(stage);
    }

    /// `other` after `self`.
    pub fn then(mut self, other: &ChainMap) -> ChainMap {
        self.stages.extend(other.stages.iter().cloned());
        self
    }

    pub fn inverse(&self) -> ChainMap {
        ChainMap { stages: self.stages.iter().rev().map(Stage::inverse).collect() }
    }

    /// Orbit of `z` through the stages, including the start point.
    pub fn trace(&self, z: Point) -> Result<Vec<Point>> {
        let mut pts = Vec::with_capacity(self.stages.len() + 1);
        pts.push(z);
        let mut w = z;
        for s in &self.stages {
            w = s.apply(w)?;
            pts.push(w);
        }
        Ok(pts)
    }
}

impl PlaneMap for ChainMap {
    fn apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        let mut w = z;
        let mut j = Mat2::identity();
        for s in &self.stages {
            let (w1, js) = s.apply_jac(w)?;
            w = w1;
            j = js * j;
        }
        Ok((w, j))
    }

    fn apply(&self, z: Point) -> Result<Point> {
        let mut w = z;
        for s in &self.stages {
            w = s.apply(w)?;
        }
        Ok(w)
    }
}

impl Invertible for ChainMap {
    fn inverse_apply_jac(&self, z: Point) -> Result<(Point, Mat2)> {
        let mut w = z;
        let mut j = Mat2::identity();
        for s in self.stages.iter().rev() {
            let (w1, js) = s.inverse().apply_jac(w)?;
            w = w1;
            j = js * j;
        }
        Ok((w, j))
    }
}

/// `h_t^{-1} o F o h_t` as a chain.
pub fn conjugate_by_ht(f: Arc<GenFunMap>, t: f64) -> Result<ChainMap> {
    let d = f.domain();
    let h = CoordinateChange::new(t);
    for x in [d.x_lo, d.x_hi] {
        h.factor(x)?;
        h.inverse_x(x)?;
    }
    Ok(ChainMap::new(vec![Stage::Ht { t }, Stage::Genfun { map: f }, Stage::HtInv { t }]))
}

/// Max of `|T F T F z - z|` over the grid.
pub fn check_reversibility<M: PlaneMap + ?Sized>(f: &M, grid: &[Point]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in grid {
        let w = f.apply(z)?;
        let back = reverse(f.apply(reverse(w))?);
        worst = worst.max((back - z).amax());
    }
    Ok(worst)
}

/// Max of `|det DF - 1|` over the grid.
pub fn check_area<M: PlaneMap + ?Sized>(f: &M, grid: &[Point]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in grid {
        worst = worst.max((f.jacobian(z)?.determinant() - 1.0).abs());
    }
    Ok(worst)
}

/// Sample `(x, x')` Chebyshev nodes, find `u` with `pi_x M(x, u) = x'` and
/// fit a generating function of the given degree to the relations
/// `-d1 S(x, x') = u`, `d2 S(x, x') = u'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenFunFit {
    pub degree: usize,
    pub nodes: usize,
    pub fit_tol: f64,
    pub solve_tol: f64,
}

pub fn fit_genfun<M: PlaneMap + ?Sized>(
    m: &M,
    domain: DomainBox,
    cfg: &GenFunFit,
) -> Result<(GenFunMap, f64)> {
    let xs = chebyshev_nodes(cfg.nodes, domain.x_lo, domain.x_hi);
    let opts = NewtonOptions { tol: 1e-14, max_iter: 60, deriv_floor: 1e-12 };
    let mut relations = Vec::with_capacity(2 * xs.len() * xs.len());
    for &x in &xs {
        let mut seed = 0.0;
        for &x1 in &xs {
            let g = |u: f64| match m.apply_jac(pt(x, u)) {
                Ok((w, j)) => (w.x - x1, j[(0, 1)]),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let u = newton_scalar(g, seed, &opts)
                .or_else(|_| scan_bracket(g, domain.u_lo, domain.u_hi, &opts))
                .map_err(|_| Error::ImplicitSolveFailed { x, u: seed })?;
            seed = u;
            let w = m.apply(pt(x, u))?;
            relations.push(Relation { functional: Functional::D1, x, y: x1, target: -u });
            relations.push(Relation { functional: Functional::D2, x, y: x1, target: w.y });
        }
    }
    fit_relations_to_map(&relations, domain, cfg)
}

/// Bracketed solve on the first sign change of `g` over a uniform scan,
/// skipping points where `g` is not finite.
fn scan_bracket<G>(mut g: G, lo: f64, hi: f64, opts: &NewtonOptions) -> Result<f64>
where
    G: FnMut(f64) -> (f64, f64),
{
    const SCAN: usize = 64;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=SCAN {
        let t = lo + (hi - lo) * k as f64 / SCAN as f64;
        let v = g(t).0;
        if !v.is_finite() {
            prev = None;
            continue;
        }
        if let Some((pt_, pv)) = prev {
            if pv.signum() != v.signum() {
                return newton_bracketed(&mut g, pt_, t, opts);
            }
        }
        prev = Some((t, v));
    }
    Err(Error::NoConvergence { iterations: 0 })
}

/// Fits a generating function from phase-space samples `(z, M(z))`.
pub fn fit_genfun_samples(
    samples: &[(Point, Point)],
    domain: DomainBox,
    cfg: &GenFunFit,
) -> Result<(GenFunMap, f64)> {
    let mut relations = Vec::with_capacity(2 * samples.len());
    for &(z, w) in samples {
        relations.push(Relation { functional: Functional::D1, x: z.x, y: w.x, target: -z.y });
        relations.push(Relation { functional: Functional::D2, x: z.x, y: w.x, target: w.y });
    }
    fit_relations_to_map(&relations, domain, cfg)
}

fn fit_relations_to_map(
    relations: &[Relation],
    domain: DomainBox,
    cfg: &GenFunFit,
) -> Result<(GenFunMap, f64)> {
    let basis = Basis::genfun(cfg.degree);
    let fit = crate::symfun::fit_linear_relations(&basis, relations)?;
    if fit.residual > cfg.fit_tol {
        return Err(Error::FitResidualTooLarge { residual: fit.residual, tol: cfg.fit_tol });
    }
    Ok((GenFunMap::new(fit.poly, domain, cfg.solve_tol)?, fit.residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shear() -> GenFunMap {
        let s = BivariatePoly::from_terms(2, true, &[((2, 0), 0.5), ((1, 1), -1.0)]).unwrap();
        GenFunMap::new(s, DomainBox::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 1e-13).unwrap()
    }

    #[test]
    fn shear_jacobian_closed_form() {
        let j = shear().jacobian(pt(0.3, -0.2)).unwrap();
        assert!((j - Mat2::new(1.0, 1.0, 0.0, 1.0)).amax() < 1e-14);
    }

    #[test]
    fn ht_inverse_jacobian_is_inverse() {
        let h = CoordinateChange::new(0.07);
        let z = pt(0.4, -0.3);
        let (w, j) = h.apply_jac(z).unwrap();
        let (back, ji) = h.inverse_apply_jac(w).unwrap();
        assert!((back - z).amax() < 1e-15);
        assert!((ji * j - Mat2::identity()).amax() < 1e-14);
    }

    #[test]
    fn chain_inverse_roundtrip() {
        let f = Arc::new(shear());
        let s = Scalings { p: -0.3, lambda: -0.5, mu: 0.2 };
        let c = ChainMap::new(vec![
            Stage::Lambda { scalings: s },
            Stage::Genfun { map: f.clone() },
            Stage::Ht { t: 0.05 },
        ]);
        let z = pt(0.1, 0.2);
        let w = c.apply(z).unwrap();
        assert!((c.inverse().apply(w).unwrap() - z).amax() < 1e-14);
        assert!((c.inverse_apply(w).unwrap() - z).amax() < 1e-14);
    }
}
