//! Approximate conjugations between Cantor sets of two maps in the class,
//! their decay rates, Hölder fits and the singular-value envelope of the
//! four-step rescaling chains.


use nalgebra::{DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::{base_box, build_chain, build_chain_at, code_to_point, pad, DyadicWord, PieceConfig};
use crate::error::{Error, Result};
use crate::map::{pt, ChainMap, GenFunMap, Invertible, Mat2, PlaneMap, Point, Stage};
use crate::renorm::{find_period2, map_distance, FixedPoint, Renormalizer, RenormTower, Tail, ZoomSearch};
use crate::symfun::DomainBox;

/// A Cantor point with its conjugacy value and derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugacySample {
    pub word: DyadicWord,
    pub x: [f64; 2],
    pub h: [f64; 2],
    #[serde(rename = "Dh")]
    pub dh: [[f64; 2]; 2],
    pub n: usize,
}

fn mat_rows(m: &Mat2) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// `h_n = Psi~_w^{4n} o (Psi_w^{4n})^{-1}` between the Cantor sets of two towers.
pub struct Conjugator<'a> {
    f: &'a RenormTower,
    g: &'a RenormTower,
    /// `B_0 u B_1` of `f`'s levels, padded, for the landing check.
    landing: Vec<(DomainBox, DomainBox)>,
    /// `t` when `g`'s base is `h_t^{-1} f_0 h_t`.
    seed: Option<f64>,
}

const LANDING_PAD: f64 = 1e-9;

impl<'a> Conjugator<'a> {
    pub fn new(f: &'a RenormTower, g: &'a RenormTower, n_max: usize, r: f64, cfg: &PieceConfig) -> Result<Self> {
        let mut landing = Vec::with_capacity(4 * n_max + 1);
        for k in 0..=4 * n_max {
            let s = f.scalings(k)?;
            let b0 = base_box(s.p, r, cfg.aspect);
            let lv = f.level(k)?;
            let img: Vec<Point> = crate::cantor::boundary(&b0, cfg.boundary_samples)
                .into_iter()
                .map(|z| lv.apply(z))
                .collect::<Result<_>>()?;
            let b1 = crate::cantor::hull(&img);
            let margin = 0.05 * b0.width();
            landing.push((pad(&b0, LANDING_PAD), pad(&b1, margin)));
        }
        Ok(Self { f, g, landing, seed: None })
    }

    /// Replace the identity at the bottom of the chains by the exact
    /// conjugacy between level `4n` of the two towers, for a pair related by
    /// `h_t`. That conjugacy is
    /// `Lambda~_{m-1}^{-1} .. Lambda~_0^{-1} h_t^{-1} Lambda_0 .. Lambda_{m-1}`.
    pub fn with_coordinate_seed(mut self, t: f64) -> Self {
        self.seed = Some(t);
        self
    }

    fn seed_chain(&self, m: usize) -> Result<Option<ChainMap>> {
        let Some(t) = self.seed else { return Ok(None) };
        let mut c = ChainMap::identity();
        for k in (0..m).rev() {
            c.push(Stage::Lambda { scalings: self.f.scalings(k)? });
        }
        c.push(Stage::HtInv { t });
        for k in 0..m {
            c.push(Stage::LambdaInv { scalings: self.g.scalings(k)? });
        }
        Ok(Some(c))
    }

    /// `(h_n(x), Dh_n(x))` for `x` in the piece coded by the first `4n`
    /// letters of `word`.
    pub fn eval(&self, n: usize, word: &DyadicWord, x: Point) -> Result<(Point, Mat2)> {
        if n == 0 {
            return match self.seed_chain(0)? {
                Some(c) => c.apply_jac(x),
                None => Ok((x, Mat2::identity())),
            };
        }
        let m = 4 * n;
        if word.len() < m {
            return Err(Error::TowerTooShallow { have: word.len(), need: m });
        }
        let w = word.prefix(m);
        let psi = build_chain(self.f, &w)?;
        let (y, jinv) = psi.inverse_apply_jac(x)?;
        if let Some((b0, b1)) = self.landing.get(m) {
            if !(b0.contains(y.x, y.y) || b1.contains(y.x, y.y)) {
                return Err(Error::PieceMismatch { word: w.to_string() });
            }
        }
        let (y, jinv) = match self.seed_chain(m)? {
            Some(c) => {
                let (v, js) = c.apply_jac(y)?;
                (v, js * jinv)
            }
            None => (y, jinv),
        };
        let (z, jt) = build_chain(self.g, &w)?.apply_jac(y)?;
        Ok((z, jt * jinv))
    }

    pub fn sample(&self, n: usize, word: &DyadicWord, x: Point) -> Result<ConjugacySample> {
        let (h, dh) = self.eval(n, word, x)?;
        Ok(ConjugacySample { word: *word, x: [x.x, x.y], h: [h.x, h.y], dh: mat_rows(&dh), n })
    }
}

/// Random codings of length `len` and their Cantor points in `tower`.
pub fn cantor_samples(tower: &RenormTower, len: usize, count: usize, seed: u64) -> Result<Vec<(DyadicWord, Point)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<DyadicWord> = (0..count)
        .map(|_| {
            let v = if len >= 64 { rng.gen::<u64>() } else { rng.gen_range(0..1u64 << len) };
            DyadicWord::from_value(v, len).expect("value fits")
        })
        .collect();
    words
        .par_iter()
        .map(|w| Ok((*w, code_to_point(tower, w)?)))
        .collect()
}

/// One row of the decay table: differences between levels `n + 1` and `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub sup_dh: f64,
    pub sup_ddh: f64,
    /// `sup_dh(n) / sup_dh(n - 1)`.
    pub ratio: Option<f64>,
    /// `sup_ddh(n) / sup_ddh(n - 1)`.
    pub d_ratio: Option<f64>,
    pub flag: DecayFlag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecayFlag {
    Ok,
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Noise floor for values and derivatives.
    pub floor: (f64, f64),
    /// Sampled `C^2` distance between the two base maps.
    pub distance: f64,
}

/// `sup |h_{n+1} - h_n|` and `sup |Dh_{n+1} - Dh_n|` per level.
fn level_sups(c: &Conjugator, samples: &[(DyadicWord, Point)], n_max: usize) -> Result<Vec<(f64, f64)>> {
    let per: Vec<Result<Vec<(f64, f64)>>> = samples
        .par_iter()
        .map(|(w, x)| {
            let vals: Vec<(Point, Mat2)> = (0..=n_max).map(|n| c.eval(n, w, *x)).collect::<Result<_>>()?;
            Ok(vals
                .windows(2)
                .map(|p| ((p[1].0 - p[0].0).norm(), (p[1].1 - p[0].1).norm()))
                .collect())
        })
        .collect();
    let mut sups = vec![(0.0f64, 0.0f64); n_max];
    for v in per {
        for (k, (a, b)) in v?.into_iter().enumerate() {
            sups[k].0 = sups[k].0.max(a);
            sups[k].1 = sups[k].1.max(b);
        }
    }
    Ok(sups)
}

/// Noise floor: ten times the level differences of the identity pair.
pub fn noise_floor(f: &RenormTower, samples: &[(DyadicWord, Point)], n_max: usize, r: f64, cfg: &PieceConfig) -> Result<(f64, f64)> {
    let c = Conjugator::new(f, f, n_max, r, cfg)?;
    let sups = level_sups(&c, samples, n_max)?;
    let v = sups.iter().map(|s| s.0).fold(0.0, f64::max);
    let d = sups.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok((10.0 * v.max(f64::EPSILON), 10.0 * d.max(f64::EPSILON)))
}

pub fn decay_table(
    c: &Conjugator,
    samples: &[(DyadicWord, Point)],
    n_max: usize,
    floor: (f64, f64),
    distance: f64,
) -> Result<DecayTable> {
    let sups = level_sups(c, samples, n_max)?;
    let rows = sups
        .iter()
        .enumerate()
        .map(|(n, &(v, d))| {
            let resolved = v > floor.0 && d > floor.1;
            let prev = n.checked_sub(1).map(|k| sups[k]);
            DecayRow {
                n,
                sup_dh: v,
                sup_ddh: d,
                ratio: prev.filter(|_| resolved).map(|p| v / p.0),
                d_ratio: prev.filter(|_| resolved).map(|p| d / p.1),
                flag: if resolved { DecayFlag::Ok } else { DecayFlag::Unresolved },
            }
        })
        .collect();
    Ok(DecayTable { rows, floor, distance })
}

/// Singular values of `D M D^{-1}` with `D = diag(1, kappa)`.
pub fn weighted_singular_values(m: &Mat2, kappa: f64) -> (f64, f64) {
    let w = Matrix2::new(m[(0, 0)], m[(0, 1)] / kappa, kappa * m[(1, 0)], m[(1, 1)]);
    let sv = w.singular_values();
    (sv.min(), sv.max())
}

/// Extreme singular values of `D chain` over the samples in the weighted norm.
pub fn singular_range<M: PlaneMap + ?Sized>(chain: &M, samples: &[Point], kappa: f64) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &z in samples {
        let (a, b) = weighted_singular_values(&chain.jacobian(z)?, kappa);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}

/// Fourth-root singular-value bounds of `Psi_w^4` for every `w` of length 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBounds {
    pub theta1: f64,
    pub theta2: f64,
    pub kappa: f64,
    pub samples: usize,
}

/// Jacobians of all sixteen four-step chains starting at `offset`, sampled
/// on the given points of level `offset + 4`.
pub fn chain_jacobians(tower: &RenormTower, offset: usize, samples: &[Point]) -> Result<Vec<Mat2>> {
    let words: Vec<DyadicWord> = DyadicWord::all(4).collect();
    let per: Vec<Result<Vec<Mat2>>> = words
        .par_iter()
        .map(|w| {
            let c = build_chain_at(tower, offset, w)?;
            samples.iter().map(|&z| c.jacobian(z)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(16 * samples.len());
    for v in per {
        out.extend(v?);
    }
    Ok(out)
}

pub fn theta_from_jacobians(jacs: &[Mat2], kappa: f64, samples: usize) -> ThetaBounds {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for j in jacs {
        let (a, b) = weighted_singular_values(j, kappa);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    ThetaBounds { theta1: lo.powf(0.25), theta2: hi.powf(0.25), kappa, samples }
}

/// `kappa` minimizing `theta2 / theta1` over a log grid on `[lo, hi]`.
pub fn optimize_kappa(jacs: &[Mat2], lo: f64, hi: f64, steps: usize, samples: usize) -> ThetaBounds {
    let steps = steps.max(2);
    (0..steps)
        .map(|k| {
            let kappa = lo * (hi / lo).powf(k as f64 / (steps - 1) as f64);
            theta_from_jacobians(jacs, kappa, samples)
        })
        .min_by(|a, b| (a.theta2 / a.theta1).total_cmp(&(b.theta2 / b.theta1)))
        .expect("non-empty grid")
}

/// `ln(theta2 nu) / ln(theta1) - 1`, defined when `theta2 nu < theta1`.
pub fn alpha0(theta1: f64, theta2: f64, nu: f64) -> Result<f64> {
    let lhs = theta2 * nu;
    if !(lhs < theta1) {
        return Err(Error::ConditionViolated { lhs, rhs: theta1 });
    }
    Ok(lhs.ln() / theta1.ln() - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub alpha: f64,
    pub c: f64,
    pub residual: f64,
    pub pairs: usize,
    pub scales: usize,
}

/// Fits `Delta <= C s^alpha` through the per-dyadic-scale maxima of
/// `(s, Delta)` pairs above `floor`.
pub fn holder_fit(pairs: &[(f64, f64)], floor: f64, min_scales: usize) -> Result<HolderFit> {
    let mut buckets: std::collections::BTreeMap<i64, (f64, f64)> = Default::default();
    let mut used = 0;
    for &(s, d) in pairs {
        if !(s > 0.0 && d > floor && d.is_finite()) {
            continue;
        }
        used += 1;
        let key = s.log2().floor() as i64;
        let e = buckets.entry(key).or_insert((s, d));
        if d > e.1 {
            *e = (s, d);
        }
    }
    if buckets.len() < min_scales {
        return Err(Error::InsufficientScales { have: buckets.len(), need: min_scales });
    }
    let xs: Vec<f64> = buckets.values().map(|(s, _)| s.ln()).collect();
    let ys: Vec<f64> = buckets.values().map(|(_, d)| d.ln()).collect();
    let (alpha, icpt, residual) = crate::cantor::linear_fit(&xs, &ys);
    Ok(HolderFit { alpha, c: icpt.exp(), residual, pairs: used, scales: buckets.len() })
}

/// Pairs `(|y - x|, |Dh_n(y) - Dh_n(x)|)` with `y` the Cantor point whose
/// coding differs from `x`'s first at letter `k + 1`, for `k` in `scales`.
pub fn holder_pairs(
    c: &Conjugator,
    f: &RenormTower,
    n: usize,
    len: usize,
    scales: std::ops::Range<usize>,
    per_scale: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::new();
    for k in scales {
        for _ in 0..per_scale {
            let v = rng.gen_range(0..1u64 << len);
            let w = DyadicWord::from_value(v, len)?;
            let u = DyadicWord::from_value(v ^ (1u64 << k), len)?;
            jobs.push((w, u));
        }
    }
    jobs.par_iter()
        .map(|(w, u)| {
            let x = code_to_point(f, w)?;
            let y = code_to_point(f, u)?;
            let (_, dx) = c.eval(n, w, x)?;
            let (_, dy) = c.eval(n, u, y)?;
            Ok(((y - x).norm(), (dy - dx).norm()))
        })
        .collect()
}

/// Member of the class near the fixed point: `F* + eps v_nu + s e_delta`,
/// with `s` shot so that the period-2 trace of `R^K` matches `F*`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassMember {
    pub map: GenFunMap,
    pub eps: f64,
    pub shot: f64,
    pub distance: f64,
}

fn trace2<M: PlaneMap + ?Sized>(f: &M, zoom: &ZoomSearch) -> Result<f64> {
    let p2 = find_period2(f, zoom.p_lo, zoom.p_hi, zoom.samples, zoom.hint)?;
    let (w, j1) = f.apply_jac(pt(p2.p, 0.0))?;
    Ok((f.jacobian(w)? * j1).trace())
}

fn deep_trace(r: &Renormalizer, f: &GenFunMap, depth: usize, zoom: &ZoomSearch) -> Result<f64> {
    let tower = RenormTower::genfun(r, f, depth, zoom)?;
    let s = tower.scalings(depth)?;
    trace2(tower.level(depth)?, &zoom.with_hint(s.p))
}

/// Root of `g` near `center`: the sign change on a 41-point grid over
/// `center +- half` closest to `center`, refined by bisection. When the
/// admissible window is narrower than the grid, the grid is rebuilt around
/// the smallest residual seen.
fn shoot_level<G: Fn(f64) -> Result<f64> + Sync>(g: G, center: f64, half: f64) -> Option<f64> {
    const N: usize = 40;
    let (mut c, mut h) = (center, half);
    let mut bracket = None;
    for _ in 0..8 {
        let pts: Vec<(f64, Option<f64>)> = (0..=N)
            .into_par_iter()
            .map(|k| {
                let s = c - h + 2.0 * h * k as f64 / N as f64;
                (s, g(s).ok())
            })
            .collect();
        let mut best: Option<(f64, f64, f64)> = None;
        for w in pts.windows(2) {
            if let ((a, Some(ga)), (b, Some(gb))) = (w[0], w[1]) {
                if ga.signum() != gb.signum() {
                    let dist = (0.5 * (a + b) - c).abs();
                    if best.map_or(true, |(x, y, _)| dist < (0.5 * (x + y) - c).abs()) {
                        best = Some((a, b, ga));
                    }
                }
            }
        }
        if best.is_some() {
            bracket = best;
            break;
        }
        let closest = pts
            .iter()
            .filter_map(|&(s, v)| v.map(|v| (s, v.abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        c = closest.0;
        h = 2.0 * h / N as f64;
    }
    let (mut lo, mut hi, mut glo) = bracket?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(mid).ok()?;
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Offset `s` along `unstable` from `base` that matches the period-2 trace of
/// the fixed point `depth` levels down.
fn shoot(
    r: &Renormalizer,
    base: &DVector<f64>,
    unstable: &DVector<f64>,
    depth: usize,
    zoom: &ZoomSearch,
    target: f64,
    half: f64,
) -> Result<f64> {
    // Continuation in depth: the admissible window in `s` shrinks by about
    // `delta` per level, so each level searches around the previous root.
    let mut center = 0.0;
    let mut half = half;
    for d in 1..=depth {
        let g = |s: f64| -> Result<f64> {
            let f = r.to_map((base + unstable * s).as_slice())?;
            Ok(deep_trace(r, &f, d, zoom)? - target)
        };
        center = shoot_level(g, center, half).ok_or_else(|| Error::NotInClass(format!("no shooting bracket at depth {d}")))?;
        half /= 8.0;
    }
    Ok(center)
}

pub fn class_member(
    r: &Renormalizer,
    fp: &FixedPoint,
    stable: &DVector<f64>,
    unstable: &DVector<f64>,
    eps: f64,
    depth: usize,
    zoom: &ZoomSearch,
) -> Result<ClassMember> {
    let zoom = zoom.with_hint(fp.scalings.p);
    let target = trace2(&fp.map, &zoom)?;
    let base = DVector::from_vec(r.coeffs(&fp.map)) + stable * eps;
    let shot = shoot(r, &base, unstable, depth, &zoom, target, eps)?;
    let map = r.to_map((&base + unstable * shot).as_slice())?;
    let grid = fp.map.domain_grid(12);
    let distance = map_distance(&map, &fp.map, &grid, 2)?;
    Ok(ClassMember { map, eps, shot, distance })
}

/// Refitted tower of a class member, re-shot along `unstable` every `block`
/// levels.
///
/// Rounding in the refit grows like `delta^k`, so a single shot cannot keep
/// the deep levels on the stable manifold. Each restart moves level `k` by
/// the returned offset, which is orders of magnitude below its distance to
/// the fixed point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassTower {
    pub tower: RenormTower,
    /// `(level, offset)` for every restart.
    pub restarts: Vec<(usize, f64)>,
}

pub fn class_tower(
    r: &Renormalizer,
    fp: &FixedPoint,
    member: &ClassMember,
    unstable: &DVector<f64>,
    depth: usize,
    block: usize,
    zoom: &ZoomSearch,
) -> Result<ClassTower> {
    let zoom = zoom.with_hint(fp.scalings.p);
    let target = trace2(&fp.map, &zoom)?;
    let lookahead = block + 2;
    let mut maps = vec![member.map.clone()];
    let mut restarts = Vec::new();
    let mut z = zoom;
    for k in 1..=depth {
        let rf = r.renormalize(&maps[k - 1], &z)?;
        z = rf.next_zoom(&zoom);
        let mut next = rf.map;
        if block > 0 && k % block == 0 && k < depth {
            let base = DVector::from_vec(r.coeffs(&next));
            let s = shoot(r, &base, unstable, lookahead, &z, target, 1e-3 * member.eps)?;
            next = r.to_map((&base + unstable * s).as_slice())?;
            restarts.push((k, s));
        }
        maps.push(next);
    }
    let tower = RenormTower::from_maps(maps, &zoom)?.with_tail(Tail::from_fixed(fp));
    Ok(ClassTower { tower, restarts })
}
