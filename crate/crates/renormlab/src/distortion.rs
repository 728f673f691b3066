//! Affine-approximation error terms and Monte-Carlo checks of their bounds.
//!
//! `E(x, y) = psi(y) - psi(x) - Dpsi(x)(y - x)` and
//! `ED(x, y) = Dpsi(y) - Dpsi(x)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::{base_pieces, build_chain, DyadicWord, PieceConfig};
use crate::error::Result;
use crate::map::{pt, ChainMap, Invertible, Mat2, PlaneMap, Point};
use crate::renorm::RenormTower;
use crate::symfun::DomainBox;

pub fn e_term<M: PlaneMap + ?Sized>(psi: &M, x: Point, y: Point) -> Result<Point> {
    let (fx, jx) = psi.apply_jac(x)?;
    let fy = psi.apply(y)?;
    Ok(fy - fx - jx * (y - x))
}

pub fn ed_term<M: PlaneMap + ?Sized>(psi: &M, x: Point, y: Point) -> Result<Mat2> {
    Ok(psi.jacobian(y)? - psi.jacobian(x)?)
}

/// Residual of an exact identity together with the size of its terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cancellation {
    pub residual: f64,
    /// `max(1, |term_1|, |term_2|)`.
    pub scale: f64,
}

impl Cancellation {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

fn inverse_e<M: Invertible + ?Sized>(psi: &M, x: Point, y: Point) -> Result<(Point, Point, Point, Mat2)> {
    let (xm, jinv_x) = psi.inverse_apply_jac(x)?;
    let ym = psi.inverse_apply(y)?;
    Ok((xm, ym, ym - xm - jinv_x * (y - x), jinv_x))
}

/// `Dpsi(psi^-1 x) E_{psi^-1}(x, y) + E_psi(psi^-1 x, psi^-1 y)`, which
/// vanishes identically.
pub fn check_cancellation_e<M: Invertible + ?Sized>(psi: &M, x: Point, y: Point) -> Result<Cancellation> {
    let (xm, ym, e_inv, _) = inverse_e(psi, x, y)?;
    let t1 = psi.jacobian(xm)? * e_inv;
    let t2 = e_term(psi, xm, ym)?;
    Ok(Cancellation { residual: (t1 + t2).norm(), scale: 1f64.max(t1.norm()).max(t2.norm()) })
}

/// `Dpsi(psi^-1 x) ED_{psi^-1}(x, y) + ED_psi(psi^-1 x, psi^-1 y) Dpsi^-1(y)`,
/// which vanishes identically.
pub fn check_cancellation_ed<M: Invertible + ?Sized>(psi: &M, x: Point, y: Point) -> Result<Cancellation> {
    let (xm, jinv_x) = psi.inverse_apply_jac(x)?;
    let (ym, jinv_y) = psi.inverse_apply_jac(y)?;
    let t1 = psi.jacobian(xm)? * (jinv_y - jinv_x);
    let t2 = (psi.jacobian(ym)? - psi.jacobian(xm)?) * jinv_y;
    Ok(Cancellation { residual: (t1 + t2).norm(), scale: 1f64.max(t1.norm()).max(t2.norm()) })
}

/// Frobenius norms of the second and third derivative tensors at `z`, by
/// central differences of the Jacobian with step `h`.
pub fn higher_derivatives<M: PlaneMap + ?Sized>(psi: &M, z: Point, h: f64) -> Result<(f64, f64)> {
    let e = [pt(h, 0.0), pt(0.0, h)];
    let j0 = psi.jacobian(z)?;
    let jp = [psi.jacobian(z + e[0])?, psi.jacobian(z + e[1])?];
    let jm = [psi.jacobian(z - e[0])?, psi.jacobian(z - e[1])?];
    let d2: f64 = (0..2).map(|k| ((jp[k] - jm[k]) / (2.0 * h)).norm_squared()).sum();
    let mut d3 = 0.0;
    for k in 0..2 {
        d3 += ((jp[k] - j0 * 2.0 + jm[k]) / (h * h)).norm_squared();
    }
    let mixed = (psi.jacobian(z + e[0] + e[1])? - psi.jacobian(z + e[0] - e[1])? - psi.jacobian(z - e[0] + e[1])?
        + psi.jacobian(z - e[0] - e[1])?)
        / (4.0 * h * h);
    d3 += 2.0 * mixed.norm_squared();
    Ok((d2.sqrt(), d3.sqrt()))
}

/// Pointwise `C^2` gap: `max(|a - b|, |Da - Db|_F, |D^2 a - D^2 b|_F)`.
pub fn c2_gap<A: PlaneMap + ?Sized, B: PlaneMap + ?Sized>(a: &A, b: &B, z: Point, h: f64) -> Result<f64> {
    let (az, ja) = a.apply_jac(z)?;
    let (bz, jb) = b.apply_jac(z)?;
    let mut d2 = 0.0;
    for e in [pt(h, 0.0), pt(0.0, h)] {
        let da = a.jacobian(z + e)? - a.jacobian(z - e)?;
        let db = b.jacobian(z + e)? - b.jacobian(z - e)?;
        d2 += ((da - db) / (2.0 * h)).norm_squared();
    }
    Ok((az - bz).norm().max((ja - jb).norm()).max(d2.sqrt()))
}

/// One map of the family with its convex domain and optional perturbation.
#[derive(Clone, Debug)]
pub struct Patch {
    pub psi: ChainMap,
    pub tilde: Option<ChainMap>,
    pub domain: DomainBox,
}

impl Patch {
    fn step(&self) -> f64 {
        1e-3 * self.domain.width().min(self.domain.height())
    }
}

/// Sampled constants of the family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    /// `max(sup |D^2 psi|, sup |D^3 psi|, 1)`.
    #[serde(rename = "K_est")]
    pub k_est: f64,
    pub sup_d2: f64,
    pub sup_d3: f64,
    /// Sampled `|psi~ - psi|_{C^2}`, the largest over the family.
    pub c2_distance: f64,
}

#[derive(Clone, Debug)]
pub struct ChainFamily {
    pub patches: Vec<Patch>,
}

impl ChainFamily {
    /// The 16 chains of length four of `f`, on both base boxes of level
    /// four; `g` supplies the matching perturbed chains.
    pub fn from_towers(f: &RenormTower, g: Option<&RenormTower>, r: f64, cfg: &PieceConfig) -> Result<Self> {
        let bp = base_pieces(f, 4, r, cfg)?;
        let mut patches = Vec::with_capacity(32);
        for w in DyadicWord::all(4) {
            let psi = build_chain(f, &w)?;
            let tilde = g.map(|g| build_chain(g, &w)).transpose()?;
            for domain in [bp.b0, bp.b1] {
                patches.push(Patch { psi: psi.clone(), tilde: tilde.clone(), domain });
            }
        }
        Ok(Self { patches })
    }

    /// Constants from an `n x n` grid on every patch.
    pub fn constants(&self, n: usize) -> Result<LemmaConstants> {
        let per: Vec<Result<(f64, f64, f64)>> = self
            .patches
            .par_iter()
            .map(|p| {
                let h = p.step();
                let inner = DomainBox {
                    x_lo: p.domain.x_lo + h,
                    x_hi: p.domain.x_hi - h,
                    u_lo: p.domain.u_lo + h,
                    u_hi: p.domain.u_hi - h,
                };
                let (mut d2, mut d3, mut c2): (f64, f64, f64) = (0.0, 0.0, 0.0);
                for [x, u] in inner.grid(n, n) {
                    let z = pt(x, u);
                    let (a, b) = higher_derivatives(&p.psi, z, h)?;
                    d2 = d2.max(a);
                    d3 = d3.max(b);
                    if let Some(t) = &p.tilde {
                        c2 = c2.max(c2_gap(t, &p.psi, z, h)?);
                    }
                }
                Ok((d2, d3, c2))
            })
            .collect();
        let (mut d2, mut d3, mut c2): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for r in per {
            let (a, b, c) = r?;
            d2 = d2.max(a);
            d3 = d3.max(b);
            c2 = c2.max(c);
        }
        Ok(LemmaConstants { k_est: d2.max(d3).max(1.0), sup_d2: d2, sup_d3: d3, c2_distance: c2 })
    }
}

/// The bound inequalities checked by `lemma_suite`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bound {
    #[serde(rename = "5.1")]
    ETranslate,
    #[serde(rename = "5.2")]
    EShift,
    #[serde(rename = "5.3")]
    EQuadratic,
    #[serde(rename = "5.4")]
    EPerturb,
    #[serde(rename = "5.6")]
    DTranslate,
    #[serde(rename = "5.7")]
    DShift,
    #[serde(rename = "5.8")]
    DLinear,
    #[serde(rename = "5.9")]
    DPerturb,
}

impl Bound {
    pub const ALL: [Bound; 8] = [
        Bound::ETranslate,
        Bound::EShift,
        Bound::EQuadratic,
        Bound::EPerturb,
        Bound::DTranslate,
        Bound::DShift,
        Bound::DLinear,
        Bound::DPerturb,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Bound::ETranslate => "5.1",
            Bound::EShift => "5.2",
            Bound::EQuadratic => "5.3",
            Bound::EPerturb => "5.4",
            Bound::DTranslate => "5.6",
            Bound::DShift => "5.7",
            Bound::DLinear => "5.8",
            Bound::DPerturb => "5.9",
        }
    }

    fn needs_tilde(self) -> bool {
        matches!(self, Bound::EPerturb | Bound::DPerturb)
    }

    fn stream(self) -> u64 {
        Bound::ALL.iter().position(|b| *b == self).expect("listed") as u64
    }

    /// `(lhs, rhs / K)` at one sample.
    fn evaluate(self, p: &Patch, s: &Sample, c2: f64) -> Result<(f64, f64)> {
        let (x, y, d) = (s.x, s.y, s.delta);
        let r = (y - x).norm();
        let dn = d.norm();
        let psi = &p.psi;
        Ok(match self {
            Bound::ETranslate => ((e_term(psi, x + d, y + d)? - e_term(psi, x, y)?).norm(), dn * r * r),
            Bound::EShift => ((e_term(psi, x, y + d)? - e_term(psi, x, y)?).norm(), dn * r + dn * dn),
            Bound::EQuadratic => (e_term(psi, x, y)?.norm(), r * r),
            Bound::EPerturb => {
                let t = p.tilde.as_ref().expect("checked by caller");
                ((e_term(t, x, y)? - e_term(psi, x, y)?).norm(), c2 * r * r)
            }
            Bound::DTranslate => ((ed_term(psi, x + d, y + d)? - ed_term(psi, x, y)?).norm(), dn * r),
            Bound::DShift => ((ed_term(psi, x, y + d)? - ed_term(psi, x, y)?).norm(), dn),
            Bound::DLinear => (ed_term(psi, x, y)?.norm(), r),
            Bound::DPerturb => {
                let t = p.tilde.as_ref().expect("checked by caller");
                ((ed_term(t, x, y)? - ed_term(psi, x, y)?).norm(), c2 * r)
            }
        })
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub lemma: Bound,
    pub samples: usize,
    #[serde(rename = "K_est")]
    pub k_est: f64,
    pub safety: f64,
    pub max_ratio: f64,
    pub violations: usize,
    pub seed: u64,
}

struct Sample {
    patch: usize,
    x: Point,
    y: Point,
    delta: Point,
}

/// Smallest separation sampled, relative to the box size; below this the
/// error terms sink into rounding.
const MIN_SCALE: f64 = 1e-2;

fn inside(b: &DomainBox, z: Point) -> bool {
    b.contains(z.x, z.y)
}

fn uniform(rng: &mut ChaCha8Rng, b: &DomainBox) -> Point {
    pt(rng.gen_range(b.x_lo..=b.x_hi), rng.gen_range(b.u_lo..=b.u_hi))
}

/// Vector of log-uniform length in `[MIN_SCALE, 1] * diam` and uniform
/// direction.
fn offset(rng: &mut ChaCha8Rng, diam: f64) -> Point {
    let len = diam * MIN_SCALE.powf(rng.gen::<f64>());
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    pt(len * a.cos(), len * a.sin())
}

/// Draws `x`, `y` and `delta` respecting the quantifiers of `bound`:
/// every point named in the inequality lies in the same box.
fn draw(rng: &mut ChaCha8Rng, fam: &ChainFamily, bound: Bound) -> Sample {
    let patch = rng.gen_range(0..fam.patches.len());
    let b = &fam.patches[patch].domain;
    let diam = b.width().hypot(b.height());
    loop {
        let x = uniform(rng, b);
        let y = x + offset(rng, diam);
        if !inside(b, y) {
            continue;
        }
        let delta = offset(rng, diam);
        let ok = match bound {
            Bound::ETranslate | Bound::DTranslate => inside(b, x + delta) && inside(b, y + delta),
            Bound::EShift | Bound::DShift => inside(b, y + delta),
            _ => true,
        };
        if ok {
            return Sample { patch, x, y, delta };
        }
    }
}

const BATCH: usize = 256;

/// Monte-Carlo check of every bound with `K = safety * K_est`.
///
/// Batches are data-parallel; batch `b` of bound `i` draws from the ChaCha
/// stream `(i << 32) | b` of `seed`. Perturbation bounds are skipped when the
/// family has no perturbed chains.
pub fn lemma_suite(
    fam: &ChainFamily,
    consts: &LemmaConstants,
    n_samples: usize,
    safety: f64,
    seed: u64,
) -> Result<Vec<DistortionReport>> {
    let k = safety * consts.k_est;
    let has_tilde = fam.patches.iter().all(|p| p.tilde.is_some());
    let mut out = Vec::new();
    for bound in Bound::ALL {
        if bound.needs_tilde() && !has_tilde {
            continue;
        }
        let batches = n_samples.div_ceil(BATCH);
        let per: Vec<Result<(f64, usize)>> = (0..batches)
            .into_par_iter()
            .map(|bi| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((bound.stream() << 32) | bi as u64);
                let count = BATCH.min(n_samples - bi * BATCH);
                let (mut worst, mut bad): (f64, usize) = (0.0, 0);
                for _ in 0..count {
                    let s = draw(&mut rng, fam, bound);
                    let (lhs, rhs) = bound.evaluate(&fam.patches[s.patch], &s, consts.c2_distance)?;
                    let ratio = if rhs > 0.0 {
                        lhs / (k * rhs)
                    } else if lhs == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    if ratio > 1.0 {
                        bad += 1;
                    }
                    worst = worst.max(ratio);
                }
                Ok((worst, bad))
            })
            .collect();
        let (mut worst, mut bad) = (0.0f64, 0usize);
        for r in per {
            let (w, b) = r?;
            worst = worst.max(w);
            bad += b;
        }
        out.push(DistortionReport {
            lemma: bound,
            samples: n_samples,
            k_est: consts.k_est,
            safety,
            max_ratio: worst,
            violations: bad,
            seed,
        });
    }
    Ok(out)
}

/// Worst cancellation residuals over random pairs `x = psi(a)`, `y = psi(b)`
/// with `a`, `b` in the same box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub samples: usize,
    pub max_residual_e: f64,
    pub max_relative_e: f64,
    pub max_residual_ed: f64,
    pub max_relative_ed: f64,
    pub seed: u64,
}

pub fn cancellation_suite(fam: &ChainFamily, n_samples: usize, seed: u64) -> Result<CancellationReport> {
    let batches = n_samples.div_ceil(BATCH);
    let per: Vec<Result<[f64; 4]>> = (0..batches)
        .into_par_iter()
        .map(|bi| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(bi as u64);
            let count = BATCH.min(n_samples - bi * BATCH);
            let mut m = [0.0f64; 4];
            for _ in 0..count {
                let s = draw(&mut rng, fam, Bound::EQuadratic);
                let psi = &fam.patches[s.patch].psi;
                let (x, y) = (psi.apply(s.x)?, psi.apply(s.y)?);
                let ce = check_cancellation_e(psi, x, y)?;
                let cd = check_cancellation_ed(psi, x, y)?;
                m[0] = m[0].max(ce.residual);
                m[1] = m[1].max(ce.relative());
                m[2] = m[2].max(cd.residual);
                m[3] = m[3].max(cd.relative());
            }
            Ok(m)
        })
        .collect();
    let mut m = [0.0f64; 4];
    for r in per {
        let v = r?;
        for k in 0..4 {
            m[k] = m[k].max(v[k]);
        }
    }
    Ok(CancellationReport {
        samples: n_samples,
        max_residual_e: m[0],
        max_relative_e: m[1],
        max_residual_ed: m[2],
        max_relative_ed: m[3],
        seed,
    })
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `int_a^b g(t) dt` by composite five-point Gauss-Legendre on `m` panels.
pub fn quadrature<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, m: usize) -> f64 {
    let m = m.max(1);
    let h = (b - a) / m as f64;
    let mut s = 0.0;
    for k in 0..m {
        let c = a + (k as f64 + 0.5) * h;
        for (t, w) in GL5 {
            s += w * g(c + 0.5 * h * t);
        }
    }
    0.5 * h * s
}

/// One-variable error term in integral form, `int_x^y psi''(t) (y - t) dt`.
pub fn e_integral_1d<G: Fn(f64) -> f64>(psi2: G, x: f64, y: f64, m: usize) -> f64 {
    quadrature(|t| psi2(t) * (y - t), x, y, m)
}

/// The integral expression for `E(x, y + delta) - E(x, y)` in one variable:
/// `int_y^{y+delta} psi''(t) (y - t) dt + delta int_x^{y+delta} psi''(t) dt`.
pub fn e_shift_integral_1d<G: Fn(f64) -> f64>(psi2: G, x: f64, y: f64, delta: f64, m: usize) -> f64 {
    quadrature(|t| psi2(t) * (y - t), y, y + delta, m) + delta * quadrature(&psi2, x, y + delta, m)
}
