//! Bivariate polynomials in total-degree form, plus the scalar Newton solver
//! and the least-squares machinery shared by the other modules.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial `sum c[i][j] x^i y^j` over `i + j <= degree`.
///
/// Row `i` of the coefficient table holds `degree + 1 - i` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoly")]
pub struct BivariatePoly {
    degree: usize,
    symmetric: bool,
    coeffs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPoly {
    degree: usize,
    symmetric: bool,
    coeffs: Vec<Vec<f64>>,
}

impl TryFrom<RawPoly> for BivariatePoly {
    type Error = Error;

    fn try_from(raw: RawPoly) -> Result<Self> {
        BivariatePoly::from_table(raw.degree, raw.symmetric, raw.coeffs)
    }
}

/// Partial derivatives `d^a_x d^b_y P` for `a + b <= order`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Derivs {
    order: usize,
    table: [[f64; 4]; 4],
}

impl Derivs {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Returns `d^a_x d^b_y P`; panics if `a + b` exceeds the computed order.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        assert!(a + b <= self.order, "derivative ({a},{b}) not computed");
        self.table[a][b]
    }
}

#[inline]
fn falling(k: usize, a: usize) -> f64 {
    let mut f = 1.0;
    for m in 0..a {
        f *= (k - m) as f64;
    }
    f
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for m in 0..k {
        b = b * (n - m) as f64 / (m + 1) as f64;
    }
    b
}

impl BivariatePoly {
    pub fn zeros(degree: usize, symmetric: bool) -> Self {
        let coeffs = (0..=degree).map(|i| vec![0.0; degree + 1 - i]).collect();
        Self { degree, symmetric, coeffs }
    }

    /// Builds from a triangular table, validating shape, finiteness and symmetry.
    pub fn from_table(degree: usize, symmetric: bool, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.len() != degree + 1 {
            return Err(Error::InvalidPoly(format!(
                "expected {} rows, got {}",
                degree + 1,
                coeffs.len()
            )));
        }
        for (i, row) in coeffs.iter().enumerate() {
            if row.len() != degree + 1 - i {
                return Err(Error::InvalidPoly(format!("row {i} has length {}", row.len())));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPoly(format!("row {i} has a non-finite entry")));
            }
        }
        let poly = Self { degree, symmetric, coeffs };
        if symmetric {
            for i in 0..=degree {
                for j in 0..=degree - i {
                    if poly.coeffs[i][j] != poly.coeffs[j][i] {
                        return Err(Error::InvalidPoly(format!("c[{i}][{j}] != c[{j}][{i}]")));
                    }
                }
            }
        }
        Ok(poly)
    }

    /// Builds from a list of `((i, j), c)` terms. With `symmetric` set each term
    /// is mirrored, so only one of `(i, j)` and `(j, i)` should be listed.
    pub fn from_terms(degree: usize, symmetric: bool, terms: &[((usize, usize), f64)]) -> Result<Self> {
        let mut p = Self::zeros(degree, symmetric);
        for &((i, j), c) in terms {
            if i + j > degree {
                return Err(Error::InvalidPoly(format!("term ({i},{j}) exceeds degree {degree}")));
            }
            p.set(i, j, c);
        }
        Ok(p)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            0.0
        } else {
            self.coeffs[i][j]
        }
    }

    /// Sets `c[i][j]`, and `c[j][i]` too when the polynomial is symmetric.
    pub fn set(&mut self, i: usize, j: usize, c: f64) {
        self.coeffs[i][j] = c;
        if self.symmetric {
            self.coeffs[j][i] = c;
        }
    }

    /// `d^a_x d^b_y P(x, y)`, evaluated by nested Horner sums.
    pub fn partial(&self, x: f64, y: f64, a: usize, b: usize) -> f64 {
        let n = self.degree;
        if a > n || b > n {
            return 0.0;
        }
        let mut total = 0.0;
        for i in (a..=n).rev() {
            let mut inner = 0.0;
            if n - i >= b {
                for j in (b..=n - i).rev() {
                    inner = inner * y + self.coeffs[i][j] * falling(j, b);
                }
            }
            total = total * x + falling(i, a) * inner;
        }
        total
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.partial(x, y, 0, 0)
    }

    pub fn eval_with_derivatives(&self, x: f64, y: f64, order: usize) -> Derivs {
        assert!(order <= 3, "order must be at most 3");
        let mut d = Derivs { order, table: [[0.0; 4]; 4] };
        for a in 0..=order {
            for b in 0..=order - a {
                d.table[a][b] = self.partial(x, y, a, b);
            }
        }
        d
    }

    /// `Q(x, y) = P(lambda x + p, lambda y + p)`.
    pub fn affine_precompose(&self, lambda: f64, p: f64) -> Result<Self> {
        if lambda == 0.0 {
            return Err(Error::ZeroScale);
        }
        let n = self.degree;
        let mut ppow = vec![1.0; n + 1];
        let mut lpow = vec![1.0; n + 1];
        for k in 1..=n {
            ppow[k] = ppow[k - 1] * p;
            lpow[k] = lpow[k - 1] * lambda;
        }
        let mut q = Self::zeros(n, self.symmetric);
        for k in 0..=n {
            for l in 0..=n - k {
                let mut s = 0.0;
                for i in k..=n {
                    for j in l..=n - i {
                        s += self.coeffs[i][j]
                            * binomial(i, k)
                            * binomial(j, l)
                            * ppow[i - k]
                            * ppow[j - l];
                    }
                }
                q.coeffs[k][l] = s * lpow[k + l];
            }
        }
        if self.symmetric {
            // Exact mirror: the two sums above round differently.
            for k in 0..=n {
                for l in k + 1..=n - k {
                    q.coeffs[l][k] = q.coeffs[k][l];
                }
            }
        }
        Ok(q)
    }

    /// Largest coefficientwise absolute difference (degrees may differ).
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let n = self.degree.max(other.degree);
        let mut m: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n - i {
                m = m.max((self.coeff(i, j) - other.coeff(i, j)).abs());
            }
        }
        m
    }
}

/// Linear functional of a polynomial at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Functional {
    Value,
    D1,
    D2,
}

/// One least-squares relation `functional(P)(x, y) = target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Relation {
    pub functional: Functional,
    pub x: f64,
    pub y: f64,
    pub target: f64,
}

/// Free coefficients of a (possibly symmetric) polynomial. Monomials of total
/// degree below `min_order` are pinned to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    degree: usize,
    symmetric: bool,
    min_order: usize,
    index: Vec<(usize, usize)>,
}

impl Basis {
    pub fn new(degree: usize, symmetric: bool, min_order: usize) -> Self {
        let mut index = Vec::new();
        for d in min_order..=degree {
            for i in 0..=d {
                let j = d - i;
                if symmetric && i > j {
                    continue;
                }
                index.push((i, j));
            }
        }
        Self { degree, symmetric, min_order, index }
    }

    /// Basis for generating functions: symmetric, with constant and linear
    /// terms pinned (gauge and origin fixed).
    pub fn genfun(degree: usize) -> Self {
        Self::new(degree, true, 2)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.index
    }

    pub fn to_poly(&self, v: &[f64]) -> BivariatePoly {
        assert_eq!(v.len(), self.index.len());
        let mut p = BivariatePoly::zeros(self.degree, self.symmetric);
        for (&(i, j), &c) in self.index.iter().zip(v) {
            p.set(i, j, c);
        }
        p
    }

    pub fn to_vec(&self, p: &BivariatePoly) -> Vec<f64> {
        self.index.iter().map(|&(i, j)| p.coeff(i, j)).collect()
    }

    /// Row of the design matrix for `functional` at `(x, y)`.
    pub fn row(&self, functional: Functional, x: f64, y: f64) -> Vec<f64> {
        let (a, b) = match functional {
            Functional::Value => (0, 0),
            Functional::D1 => (1, 0),
            Functional::D2 => (0, 1),
        };
        let mono = |i: usize, j: usize| -> f64 {
            if i < a || j < b {
                return 0.0;
            }
            falling(i, a) * falling(j, b) * x.powi((i - a) as i32) * y.powi((j - b) as i32)
        };
        self.index
            .iter()
            .map(|&(i, j)| {
                if self.symmetric && i != j {
                    mono(i, j) + mono(j, i)
                } else {
                    mono(i, j)
                }
            })
            .collect()
    }

    pub fn min_order(&self) -> usize {
        self.min_order
    }
}

/// Least-squares solver with a cached pseudo-inverse, reusable across
/// right-hand sides that share one design matrix.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    design: DMatrix<f64>,
    pinv: DMatrix<f64>,
    condition: f64,
}

impl LeastSquares {
    pub const MAX_CONDITION: f64 = 1e14;

    pub fn new(design: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = design.shape();
        if rows < cols || cols == 0 {
            return Err(Error::RankDeficient { condition: f64::INFINITY });
        }
        let scale: Vec<f64> = (0..cols)
            .map(|c| {
                let n = design.column(c).norm();
                if n > 0.0 {
                    1.0 / n
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = design.clone();
        for (c, s) in scale.iter().enumerate() {
            scaled.column_mut(c).scale_mut(*s);
        }
        let svd = scaled.svd(true, true);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition < Self::MAX_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        let u = svd.u.as_ref().expect("svd computed with u");
        let vt = svd.v_t.as_ref().expect("svd computed with v_t");
        let mut inv_s = DMatrix::zeros(cols, cols);
        for k in 0..cols {
            inv_s[(k, k)] = 1.0 / sv[k];
        }
        let mut pinv = vt.transpose() * inv_s * u.transpose();
        for (r, s) in scale.iter().enumerate() {
            pinv.row_mut(r).scale_mut(*s);
        }
        Ok(Self { design, pinv, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    /// Returns the minimizer and the max-abs residual.
    pub fn solve(&self, rhs: &[f64]) -> (Vec<f64>, f64) {
        let b = nalgebra::DVector::from_column_slice(rhs);
        let x = &self.pinv * &b;
        let r = &self.design * &x - &b;
        (x.iter().copied().collect(), r.amax())
    }
}

/// Result of a polynomial fit.
#[derive(Clone, Debug)]
pub struct PolyFit {
    pub poly: BivariatePoly,
    pub residual: f64,
}

pub fn fit_linear_relations(basis: &Basis, relations: &[Relation]) -> Result<PolyFit> {
    let rows: Vec<Vec<f64>> = relations
        .iter()
        .map(|r| basis.row(r.functional, r.x, r.y))
        .collect();
    let design = DMatrix::from_fn(rows.len(), basis.len(), |r, c| rows[r][c]);
    let ls = LeastSquares::new(design)?;
    let targets: Vec<f64> = relations.iter().map(|r| r.target).collect();
    let (v, residual) = ls.solve(&targets);
    Ok(PolyFit { poly: basis.to_poly(&v), residual })
}

/// Options for the scalar solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub deriv_floor: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50, deriv_floor: 1e-14 }
    }
}

/// Newton iteration on `g`, which returns `(g(t), g'(t))`.
///
/// A single stationary iterate is nudged and retried; two in a row give
/// `DerivativeVanishes`. On convergence one polishing step is taken.
pub fn newton_scalar<G>(mut g: G, seed: f64, opts: &NewtonOptions) -> Result<f64>
where
    G: FnMut(f64) -> (f64, f64),
{
    let mut t = seed;
    let mut stalled = false;
    for _ in 0..opts.max_iter {
        let (v, dv) = g(t);
        if !v.is_finite() || !dv.is_finite() {
            return Err(Error::NoConvergence { iterations: opts.max_iter });
        }
        if v.abs() <= opts.tol {
            if dv.abs() > opts.deriv_floor {
                let t2 = t - v / dv;
                if g(t2).0.abs() <= v.abs() {
                    return Ok(t2);
                }
            }
            return Ok(t);
        }
        if dv.abs() <= opts.deriv_floor {
            if stalled {
                return Err(Error::DerivativeVanishes { at: t });
            }
            stalled = true;
            t += 1e-2 * t.abs().max(1.0);
            continue;
        }
        stalled = false;
        t -= v / dv;
    }
    Err(Error::NoConvergence { iterations: opts.max_iter })
}

/// Safeguarded Newton on a sign-changing bracket (bisection when a Newton
/// step would leave the bracket).
pub fn newton_bracketed<G>(mut g: G, lo: f64, hi: f64, opts: &NewtonOptions) -> Result<f64>
where
    G: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = g(lo);
    let (fhi, _) = g(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence { iterations: 0 });
    }
    // Keep g(a) < 0 < g(b).
    let (mut a, mut b) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut t = 0.5 * (a + b);
    let budget = opts.max_iter.max(200);
    for _ in 0..budget {
        let (v, dv) = g(t);
        if v.abs() <= opts.tol {
            if dv.abs() > opts.deriv_floor {
                let t2 = t - v / dv;
                if t2 >= a.min(b) && t2 <= a.max(b) && g(t2).0.abs() <= v.abs() {
                    return Ok(t2);
                }
            }
            return Ok(t);
        }
        if v < 0.0 {
            a = t;
        } else {
            b = t;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            return Ok(t);
        }
        let tn = if dv.abs() > opts.deriv_floor { t - v / dv } else { f64::NAN };
        t = if tn.is_finite() && tn > a.min(b) && tn < a.max(b) {
            tn
        } else {
            0.5 * (a + b)
        };
    }
    Err(Error::NoConvergence { iterations: budget })
}

/// Phase-space rectangle `[x_lo, x_hi] x [u_lo, u_hi]`, serialized as a
/// four-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct DomainBox {
    pub x_lo: f64,
    pub x_hi: f64,
    pub u_lo: f64,
    pub u_hi: f64,
}

impl TryFrom<[f64; 4]> for DomainBox {
    type Error = Error;

    fn try_from(a: [f64; 4]) -> Result<Self> {
        DomainBox::new(a[0], a[1], a[2], a[3])
    }
}

impl From<DomainBox> for [f64; 4] {
    fn from(b: DomainBox) -> Self {
        [b.x_lo, b.x_hi, b.u_lo, b.u_hi]
    }
}

impl DomainBox {
    pub fn new(x_lo: f64, x_hi: f64, u_lo: f64, u_hi: f64) -> Result<Self> {
        let all = [x_lo, x_hi, u_lo, u_hi];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain("non-finite bound".into()));
        }
        if !(x_lo < x_hi && u_lo < u_hi) {
            return Err(Error::InvalidDomain(format!("{all:?} is empty")));
        }
        Ok(Self { x_lo, x_hi, u_lo, u_hi })
    }

    pub fn contains(&self, x: f64, u: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && u >= self.u_lo && u <= self.u_hi
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.u_hi - self.u_lo
    }

    /// Uniform `nx` by `nu` grid including the edges, row-major in `x`.
    pub fn grid(&self, nx: usize, nu: usize) -> Vec<[f64; 2]> {
        let lin = |lo: f64, hi: f64, n: usize, k: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(nx * nu);
        for i in 0..nx {
            for j in 0..nu {
                out.push([lin(self.x_lo, self.x_hi, nx, i), lin(self.u_lo, self.u_hi, nu, j)]);
            }
        }
        out
    }
}

/// First-kind Chebyshev nodes on `[lo, hi]`.
pub fn chebyshev_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let c = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_direct_sum() {
        let p = BivariatePoly::from_terms(3, false, &[((2, 1), 1.5), ((0, 3), -2.0), ((1, 0), 0.5)])
            .unwrap();
        let (x, y) = (0.7, -1.3);
        let direct = 1.5 * x * x * y - 2.0 * y * y * y + 0.5 * x;
        assert!((p.eval(x, y) - direct).abs() < 1e-14);
        assert!((p.partial(x, y, 1, 1) - 3.0 * x).abs() < 1e-14);
        assert_eq!(p.partial(x, y, 0, 4), 0.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(7, 0), 1.0);
        assert_eq!(falling(5, 3), 60.0);
    }

    #[test]
    fn basis_roundtrip() {
        let b = Basis::genfun(6);
        let v: Vec<f64> = (0..b.len()).map(|k| k as f64 * 0.1 - 0.4).collect();
        let p = b.to_poly(&v);
        assert!(p.is_symmetric());
        assert_eq!(b.to_vec(&p), v);
        assert_eq!(p.coeff(0, 0), 0.0);
        assert_eq!(p.coeff(1, 0), 0.0);
    }

    #[test]
    fn chebyshev_in_range() {
        let n = chebyshev_nodes(9, -1.0, 0.5);
        assert!(n.iter().all(|&t| t > -1.0 && t < 0.5));
    }
}
