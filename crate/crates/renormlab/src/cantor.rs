//! The invariant Cantor set: dyadic coding, base pieces, rescaling chains,
//! the nested piece hierarchy and its geometry.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::map::{pt, ChainMap, Mat2, PlaneMap, Point, Stage};
use crate::renorm::RenormTower;
use crate::symfun::DomainBox;

/// Finite dyadic word, least-significant letter first: `value = sum w_{k+1} 2^k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicWord {
    bits: u64,
    len: u8,
}

impl DyadicWord {
    pub const MAX_LEN: usize = 63;

    pub fn from_value(value: u64, len: usize) -> Result<Self> {
        if len > Self::MAX_LEN || (len < 64 && value >> len != 0) {
            return Err(Error::InvalidDomain(format!("value {value} does not fit in {len} letters")));
        }
        Ok(Self { bits: value, len: len as u8 })
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: 0, len: len.min(Self::MAX_LEN) as u8 }
    }

    pub fn ones(len: usize) -> Self {
        let len = len.min(Self::MAX_LEN);
        Self { bits: (1u64 << len) - 1, len: len as u8 }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self) -> u64 {
        self.bits
    }

    /// Letter `w_{k+1}` (zero-based `k`).
    pub fn letter(&self, k: usize) -> u8 {
        ((self.bits >> k) & 1) as u8
    }

    pub fn last(&self) -> Option<u8> {
        (self.len > 0).then(|| self.letter(self.len() - 1))
    }

    /// `value + 1 mod 2^n`.
    pub fn add_one(&self) -> Self {
        let mask = if self.len == 0 { 0 } else { (1u64 << self.len) - 1 };
        Self { bits: self.bits.wrapping_add(1) & mask, len: self.len }
    }

    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let mask = if n == 0 { 0 } else { (1u64 << n) - 1 };
        Self { bits: self.bits & mask, len: n as u8 }
    }

    pub fn push(&self, letter: u8) -> Self {
        Self { bits: self.bits | (((letter & 1) as u64) << self.len), len: self.len + 1 }
    }

    pub fn all(len: usize) -> impl Iterator<Item = DyadicWord> {
        (0..1u64 << len).map(move |v| DyadicWord { bits: v, len: len as u8 })
    }
}

impl fmt::Display for DyadicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.len() {
            f.write_str(if self.letter(k) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for DyadicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DyadicWord({self})")
    }
}

impl FromStr for DyadicWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > Self::MAX_LEN {
            return Err(Error::InvalidDomain(format!("word longer than {}", Self::MAX_LEN)));
        }
        let mut w = DyadicWord::zeros(0);
        for c in s.chars() {
            w = match c {
                '0' => w.push(0),
                '1' => w.push(1),
                _ => return Err(Error::InvalidDomain(format!("bad letter {c:?}"))),
            };
        }
        Ok(w)
    }
}

impl Serialize for DyadicWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DyadicWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Invariant measure of a depth-`n` piece.
pub fn adding_measure(depth: usize) -> f64 {
    0.5f64.powi(depth as i32 + 1)
}

/// Piece construction settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PieceConfig {
    /// First radius of the schedule `r0 2^{-k}`.
    pub r0: f64,
    pub schedule_len: usize,
    /// Half-height of `B_0` over its half-width.
    pub aspect: f64,
    pub boundary_samples: usize,
    pub pad_factor: f64,
    /// Pointwise tolerance of the permutation check, relative to the width of `B_0`.
    pub perm_tol: f64,
}

impl Default for PieceConfig {
    fn default() -> Self {
        Self { r0: 0.25, schedule_len: 6, aspect: 0.2, boundary_samples: 64, pad_factor: 10.0, perm_tol: 1e-9 }
    }
}

/// Base pieces of one tower level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePieces {
    pub b0: DomainBox,
    /// Padded hull of `F(B_0)`.
    pub b1: DomainBox,
    /// Box distance between `B_0` and `B_1`.
    pub gap: f64,
    pub radius: f64,
}

/// Axis-aligned rectangle of half-width `r` and half-height `aspect r` at `(p, 0)`.
pub fn base_box(p: f64, r: f64, aspect: f64) -> DomainBox {
    DomainBox { x_lo: p - r, x_hi: p + r, u_lo: -aspect * r, u_hi: aspect * r }
}

/// Counter-clockwise boundary samples of a box, `n` per side.
pub fn boundary(b: &DomainBox, n: usize) -> Vec<Point> {
    let n = n.max(1);
    let mut out = Vec::with_capacity(4 * n);
    let lerp = |a: f64, c: f64, k: usize| a + (c - a) * k as f64 / n as f64;
    for k in 0..n {
        out.push(pt(lerp(b.x_lo, b.x_hi, k), b.u_lo));
    }
    for k in 0..n {
        out.push(pt(b.x_hi, lerp(b.u_lo, b.u_hi, k)));
    }
    for k in 0..n {
        out.push(pt(lerp(b.x_hi, b.x_lo, k), b.u_hi));
    }
    for k in 0..n {
        out.push(pt(b.x_lo, lerp(b.u_hi, b.u_lo, k)));
    }
    out
}

fn spacing(b: &DomainBox, n: usize) -> f64 {
    b.width().max(b.height()) / n.max(1) as f64
}

/// Smallest axis-aligned box containing the points.
pub fn hull(points: &[Point]) -> DomainBox {
    let mut b = DomainBox { x_lo: f64::INFINITY, x_hi: f64::NEG_INFINITY, u_lo: f64::INFINITY, u_hi: f64::NEG_INFINITY };
    for z in points {
        b.x_lo = b.x_lo.min(z.x);
        b.x_hi = b.x_hi.max(z.x);
        b.u_lo = b.u_lo.min(z.y);
        b.u_hi = b.u_hi.max(z.y);
    }
    b
}

pub fn pad(b: &DomainBox, d: f64) -> DomainBox {
    DomainBox { x_lo: b.x_lo - d, x_hi: b.x_hi + d, u_lo: b.u_lo - d, u_hi: b.u_hi + d }
}

pub fn box_inside(inner: &DomainBox, outer: &DomainBox) -> bool {
    inner.x_lo >= outer.x_lo && inner.x_hi <= outer.x_hi && inner.u_lo >= outer.u_lo && inner.u_hi <= outer.u_hi
}

/// Euclidean distance between two boxes; zero when they meet.
pub fn box_gap(a: &DomainBox, b: &DomainBox) -> f64 {
    let dx = (a.x_lo - b.x_hi).max(b.x_lo - a.x_hi).max(0.0);
    let du = (a.u_lo - b.u_hi).max(b.u_lo - a.u_hi).max(0.0);
    dx.hypot(du)
}

fn boxes_meet(a: &DomainBox, b: &DomainBox) -> bool {
    a.x_lo <= b.x_hi && b.x_lo <= a.x_hi && a.u_lo <= b.u_hi && b.u_lo <= a.u_hi
}

fn spectral_norm(m: &Mat2) -> f64 {
    m.singular_values().max()
}

/// Image of sampled points with the padding `pad_factor * Lip * spacing`.
fn padded_image<M: PlaneMap + ?Sized>(f: &M, pts: &[Point], sp: f64, pad_factor: f64) -> Result<(Vec<Point>, f64)> {
    let mut img = Vec::with_capacity(pts.len());
    let mut lip: f64 = 0.0;
    for &z in pts {
        let (w, j) = f.apply_jac(z)?;
        img.push(w);
        lip = lip.max(spectral_norm(&j));
    }
    Ok((img, pad_factor * lip * sp))
}

/// `B_0` and `B_1` of tower level `k` at radius `r`, with the checks that
/// make the hierarchy well defined: `B_0` and `B_1` are disjoint, the
/// rescaled base pieces of level `k + 1` land in `B_0`, and `F^2` returns the
/// period-2 point to `B_0`.
pub fn base_pieces(tower: &RenormTower, k: usize, r: f64, cfg: &PieceConfig) -> Result<BasePieces> {
    let (b0, b1) = raw_base(tower, k, r, cfg)?;
    let gap = box_gap(&b0, &b1);
    if gap <= 0.0 {
        return Err(Error::ContainmentFailed(format!("B0 and B1 meet at level {k}, r = {r}")));
    }
    let s = tower.scalings(k)?;
    let (c0, c1) = raw_base(tower, k + 1, r, cfg)?;
    for b in [c0, c1] {
        let lo = s.lambda_apply(pt(b.x_lo, b.u_lo));
        let hi = s.lambda_apply(pt(b.x_hi, b.u_hi));
        let img = hull(&[lo, hi]);
        if !box_inside(&img, &b0) {
            return Err(Error::ContainmentFailed(format!("rescaled level {} pieces leave B0 at level {k}, r = {r}", k + 1)));
        }
    }
    let f = tower.level(k)?;
    let p = pt(s.p, 0.0);
    let back = f.apply(f.apply(p)?)?;
    if !b0.contains(back.x, back.y) {
        return Err(Error::ContainmentFailed(format!("F^2 misses B0 at level {k}")));
    }
    Ok(BasePieces { b0, b1, gap, radius: r })
}

fn raw_base(tower: &RenormTower, k: usize, r: f64, cfg: &PieceConfig) -> Result<(DomainBox, DomainBox)> {
    let s = tower.scalings(k)?;
    let b0 = base_box(s.p, r, cfg.aspect);
    let f = tower.level(k)?;
    let pts = boundary(&b0, cfg.boundary_samples);
    let (img, pd) = padded_image(f, &pts, spacing(&b0, cfg.boundary_samples), cfg.pad_factor)?;
    Ok((b0, pad(&hull(&img), pd)))
}

/// First radius of the schedule passing `base_pieces` at every level up to `levels`.
pub fn choose_radius(tower: &RenormTower, levels: usize, cfg: &PieceConfig) -> Result<f64> {
    let mut last = None;
    for k in 0..cfg.schedule_len {
        let r = cfg.r0 * 0.5f64.powi(k as i32);
        let ok = (0..=levels).try_for_each(|lv| base_pieces(tower, lv, r, cfg).map(|_| ()));
        match ok {
            Ok(()) => return Ok(r),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::ContainmentFailed("empty radius schedule".into())))
}

/// `Psi_w^n = psi^1_{w_1} o ... o psi^n_{w_n}` with `psi_0^k = Lambda_{R^{k-1}F}`
/// and `psi_1^k = R^{k-1}F o Lambda_{R^{k-1}F}`.
pub fn build_chain(tower: &RenormTower, w: &DyadicWord) -> Result<ChainMap> {
    build_chain_at(tower, 0, w)
}

/// `build_chain` for the tower shifted by `offset` levels.
pub fn build_chain_at(tower: &RenormTower, offset: usize, w: &DyadicWord) -> Result<ChainMap> {
    let n = w.len();
    let mut c = ChainMap::identity();
    for k in (1..=n).rev() {
        let lv = offset + k - 1;
        c.push(Stage::Lambda { scalings: tower.scalings(lv)? });
        if w.letter(k - 1) == 1 {
            c = c.then(tower.level(lv)?);
        }
    }
    Ok(c)
}

/// Chain carrying `B_0(R^n F)` onto the piece `B^n_{w nu}`, for a word of
/// length `n + 1` with last letter `nu`.
pub fn piece_chain(tower: &RenormTower, word: &DyadicWord) -> Result<ChainMap> {
    let n = word.len().checked_sub(1).ok_or_else(|| Error::InvalidDomain("empty word".into()))?;
    let psi = build_chain(tower, &word.prefix(n))?;
    Ok(if word.last() == Some(1) { tower.level(n)?.clone().then(&psi) } else { psi })
}

/// One piece of the hierarchy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub word: DyadicWord,
    pub depth: usize,
    #[serde(rename = "box")]
    pub hull: DomainBox,
    #[serde(skip)]
    pad: f64,
    #[serde(skip)]
    outline: Vec<Point>,
}

impl Piece {
    /// Padding added to the hull for containment checks.
    pub fn padding(&self) -> f64 {
        self.pad
    }

    /// Sampled boundary image.
    pub fn outline(&self) -> &[Point] {
        &self.outline
    }

    /// Diameter of the sampled boundary, measured over 32 directions.
    pub fn diameter(&self) -> f64 {
        outline_diameter(&self.outline)
    }
}

fn outline_diameter(pts: &[Point]) -> f64 {
    let mut best: f64 = 0.0;
    for d in 0..32 {
        let a = std::f64::consts::PI * d as f64 / 32.0;
        let (s, c) = a.sin_cos();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for z in pts {
            let v = c * z.x + s * z.y;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        best = best.max(hi - lo);
    }
    best / (std::f64::consts::PI / 64.0).cos()
}

/// Per-depth diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthStats {
    pub depth: usize,
    pub count: usize,
    pub max_diam: f64,
    pub min_gap: f64,
    /// Largest pointwise defect of `F(B_w) = B_{p(w)}`.
    pub perm_defect: f64,
}

/// All pieces of depths `0..=depth`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CantorApprox {
    pub depth: usize,
    pub radius: f64,
    pub levels: Vec<Vec<Piece>>,
    pub stats: Vec<DepthStats>,
    /// Fitted `C` in `max diam <= C theta^n`, with `theta` the fitted decay factor.
    pub diam_constant: f64,
    pub diam_factor: f64,
}

impl CantorApprox {
    pub fn pieces(&self, depth: usize) -> &[Piece] {
        &self.levels[depth]
    }
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 <= 0.0 && o3 * o4 <= 0.0
}

fn inside_polygon(poly: &[Point], z: Point) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > z.y) != (b.y > z.y) && z.x < a.x + (z.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            inside = !inside;
        }
    }
    inside
}

/// Whether two closed sampled outlines overlap.
pub fn outlines_meet(p: &[Point], q: &[Point]) -> bool {
    let (np, nq) = (p.len(), q.len());
    for i in 0..np {
        let (a, b) = (p[i], p[(i + 1) % np]);
        for j in 0..nq {
            if segments_cross(a, b, q[j], q[(j + 1) % nq]) {
                return true;
            }
        }
    }
    inside_polygon(p, q[0]) || inside_polygon(q, p[0])
}

fn outline_gap(p: &[Point], q: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for a in p {
        for b in q {
            best = best.min((a - b).norm());
        }
    }
    best
}

fn build_level(tower: &RenormTower, n: usize, r: f64, cfg: &PieceConfig) -> Result<Vec<Piece>> {
    let s = tower.scalings(n)?;
    let b0 = base_box(s.p, r, cfg.aspect);
    let pts = boundary(&b0, cfg.boundary_samples);
    let sp = spacing(&b0, cfg.boundary_samples);
    let words: Vec<DyadicWord> = DyadicWord::all(n + 1).collect();
    words
        .par_iter()
        .map(|w| {
            let c = piece_chain(tower, w)?;
            let (outline, pd) = padded_image(&c, &pts, sp, cfg.pad_factor)?;
            Ok(Piece { word: *w, depth: n, hull: hull(&outline), pad: pd, outline })
        })
        .collect()
}

/// Checks pairwise disjointness at one depth; returns the minimal gap.
fn check_disjoint(pieces: &[Piece]) -> Result<f64> {
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|&a, &b| pieces[a].hull.x_lo.total_cmp(&pieces[b].hull.x_lo));
    let mut gap = f64::INFINITY;
    for (i, &a) in order.iter().enumerate() {
        let pa = &pieces[a];
        if let Some(&b) = order.get(i + 1) {
            if !boxes_meet(&pa.hull, &pieces[b].hull) {
                gap = gap.min(box_gap(&pa.hull, &pieces[b].hull));
            }
        }
        for &b in &order[i + 1..] {
            let pb = &pieces[b];
            if pb.hull.x_lo > pa.hull.x_hi {
                break;
            }
            if !boxes_meet(&pa.hull, &pb.hull) {
                gap = gap.min(box_gap(&pa.hull, &pb.hull));
                continue;
            }
            if outlines_meet(&pa.outline, &pb.outline) {
                return Err(Error::DisjointnessViolation { word: pa.word.to_string(), other: pb.word.to_string() });
            }
            gap = gap.min(outline_gap(&pa.outline, &pb.outline));
        }
    }
    if pieces.len() < 2 {
        gap = 0.0;
    }
    Ok(gap)
}

fn check_nesting(children: &[Piece], parents: &[Piece]) -> Result<()> {
    children.par_iter().try_for_each(|c| {
        let n = c.word.len() - 1;
        let parent = &parents[c.word.prefix(n).value() as usize];
        if box_inside(&c.hull, &pad(&parent.hull, parent.pad)) {
            Ok(())
        } else {
            Err(Error::NestingViolation { word: c.word.to_string() })
        }
    })
}

/// Pointwise check of `F o chain_w = chain_{p(w)}` on the base boundary and
/// of the wrap-around case at the period-2 point. Returns the largest defect.
fn check_permutation(tower: &RenormTower, pieces: &[Piece], n: usize, r: f64, cfg: &PieceConfig) -> Result<f64> {
    let f = tower.level(0)?;
    let s = tower.scalings(n)?;
    let tol = cfg.perm_tol * 2.0 * r;
    let defects: Vec<Result<f64>> = pieces
        .par_iter()
        .map(|pc| {
            let w = pc.word;
            let next = w.add_one();
            if next.value() == 0 {
                let c = pt(s.p, 0.0);
                let a = f.apply(piece_chain(tower, &w)?.apply(c)?)?;
                let b = piece_chain(tower, &next)?.apply(c)?;
                let d = (a - b).norm();
                let target = &pieces[0];
                let img = hull(&pc.outline.iter().map(|&z| f.apply(z)).collect::<Result<Vec<_>>>()?);
                if d > tol || !boxes_meet(&img, &pad(&target.hull, target.pad)) {
                    return Err(Error::PermutationViolation { word: w.to_string() });
                }
                return Ok(d);
            }
            let target = &pieces[next.value() as usize];
            let mut worst: f64 = 0.0;
            for (k, y) in pc.outline.iter().enumerate() {
                let img = f.apply(*y)?;
                worst = worst.max((img - target.outline[k]).norm());
            }
            if worst > tol {
                return Err(Error::PermutationViolation { word: w.to_string() });
            }
            Ok(worst)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for d in defects {
        worst = worst.max(d?);
    }
    Ok(worst)
}

/// Builds and verifies the pieces of depths `0..=depth` at radius `r`.
pub fn build_pieces_at(tower: &RenormTower, depth: usize, r: f64, cfg: &PieceConfig) -> Result<CantorApprox> {
    let mut levels: Vec<Vec<Piece>> = Vec::with_capacity(depth + 1);
    let mut stats = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let pieces = build_level(tower, n, r, cfg)?;
        if n > 0 {
            check_nesting(&pieces, &levels[n - 1])?;
        }
        let min_gap = check_disjoint(&pieces)?;
        let perm_defect = check_permutation(tower, &pieces, n, r, cfg)?;
        let max_diam = pieces.iter().map(Piece::diameter).fold(0.0, f64::max);
        stats.push(DepthStats { depth: n, count: pieces.len(), max_diam, min_gap, perm_defect });
        levels.push(pieces);
    }
    let (diam_factor, diam_constant) = diameter_decay(&stats, 0, depth);
    Ok(CantorApprox { depth, radius: r, levels, stats, diam_constant, diam_factor })
}

/// Chooses the radius from the schedule and builds the pieces.
pub fn build_pieces(tower: &RenormTower, depth: usize, cfg: &PieceConfig) -> Result<CantorApprox> {
    let r = choose_radius(tower, depth, cfg)?;
    build_pieces_at(tower, depth, r, cfg)
}

/// Least-squares line through `(x, y)`: slope, intercept, max residual.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).abs()).fold(0.0, f64::max);
    (slope, icpt, res)
}

/// Per-level decay factor of the max diameter over depths `lo..=hi`, and
/// the constant `C` of `max diam <= C theta^n`.
pub fn diameter_decay(stats: &[DepthStats], lo: usize, hi: usize) -> (f64, f64) {
    let sel: Vec<&DepthStats> = stats.iter().filter(|s| s.depth >= lo && s.depth <= hi).collect();
    if sel.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let xs: Vec<f64> = sel.iter().map(|s| s.depth as f64).collect();
    let ys: Vec<f64> = sel.iter().map(|s| s.max_diam.ln()).collect();
    let (slope, _, _) = linear_fit(&xs, &ys);
    let theta = slope.exp();
    let c = sel.iter().map(|s| s.max_diam / theta.powi(s.depth as i32)).fold(0.0, f64::max);
    (theta, c)
}

/// One row of the box-counting regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub depth: usize,
    pub eps: f64,
    #[serde(rename = "N")]
    pub count: usize,
    pub log_inv_eps: f64,
    #[serde(rename = "logN")]
    pub log_n: f64,
}

impl DimensionRow {
    pub fn new(depth: usize, eps: f64, count: usize) -> Self {
        Self { depth, eps, count, log_inv_eps: (1.0 / eps).ln(), log_n: (count as f64).ln() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub estimate: f64,
    pub residual: f64,
    pub first_depth: usize,
    pub last_depth: usize,
}

pub fn dimension_rows(ca: &CantorApprox) -> Vec<DimensionRow> {
    ca.stats.iter().map(|s| DimensionRow::new(s.depth, s.max_diam, s.count)).collect()
}

/// Slope of `log N` against `log 1/eps` over the rows with depth in `lo..=hi`.
pub fn box_dimension(rows: &[DimensionRow], lo: usize, hi: usize) -> Result<DimensionFit> {
    let sel: Vec<&DimensionRow> = rows.iter().filter(|r| r.depth >= lo && r.depth <= hi).collect();
    if sel.len() < 2 {
        return Err(Error::InsufficientScales { have: sel.len(), need: 2 });
    }
    let xs: Vec<f64> = sel.iter().map(|r| r.log_inv_eps).collect();
    let ys: Vec<f64> = sel.iter().map(|r| r.log_n).collect();
    let (slope, _, residual) = linear_fit(&xs, &ys);
    Ok(DimensionFit { estimate: slope, residual, first_depth: lo, last_depth: hi })
}

/// Rows for the attractor of `{x -> rho x, x -> rho x + 1 - rho}`, computed by
/// iterating the interval pieces themselves.
pub fn ifs_rows(rho: f64, depth: usize) -> Vec<DimensionRow> {
    let mut pieces = vec![(0.0f64, 1.0f64)];
    let mut rows = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let eps = pieces.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
        rows.push(DimensionRow::new(n, eps, pieces.len()));
        pieces = pieces
            .iter()
            .flat_map(|&(a, b)| [(rho * a, rho * b), (rho * a + 1.0 - rho, rho * b + 1.0 - rho)])
            .collect();
    }
    rows
}

/// The Cantor point with coding `word` (length `n + 1`): the image of the
/// period-2 point of `R^n F` under the piece chain.
pub fn code_to_point(tower: &RenormTower, word: &DyadicWord) -> Result<Point> {
    let n = word.len().checked_sub(1).ok_or_else(|| Error::InvalidDomain("empty word".into()))?;
    let s = tower.scalings(n)?;
    piece_chain(tower, word)?.apply(pt(s.p, 0.0))
}

/// `2^{-n} log |DF^{2^n}(x)|`, accumulating the Jacobian product with
/// periodic renormalization.
pub fn lyapunov<M: PlaneMap + ?Sized>(f: &M, x: Point, n: u32) -> Result<f64> {
    let steps = 1u64 << n;
    let mut z = x;
    let mut m = Mat2::identity();
    let mut log_scale = 0.0;
    for k in 0..steps {
        let (w, j) = f.apply_jac(z)?;
        z = w;
        m = j * m;
        if k % 8 == 7 {
            let s = m.amax();
            m /= s;
            log_scale += s.ln();
        }
    }
    Ok((log_scale + spectral_norm(&m).ln()) / steps as f64)
}

/// Samples of `B_0 u B_1` at level `k`: a grid on `B_0` and its image.
pub fn base_samples(tower: &RenormTower, k: usize, r: f64, cfg: &PieceConfig, nx: usize, nu: usize) -> Result<Vec<Point>> {
    let s = tower.scalings(k)?;
    let b0 = base_box(s.p, r, cfg.aspect);
    let f = tower.level(k)?;
    let grid: Vec<Point> = b0.grid(nx, nu).into_iter().map(|z| pt(z[0], z[1])).collect();
    let mut out = grid.clone();
    for z in grid {
        out.push(f.apply(z)?);
    }
    Ok(out)
}

/// Observed sup of `|log |D R^k F||` over `B_0 u B_1` of levels `0..=levels`.
pub fn lyapunov_constant(tower: &RenormTower, levels: usize, r: f64, cfg: &PieceConfig, grid: usize) -> Result<f64> {
    let mut c: f64 = 0.0;
    for k in 0..=levels {
        let f = tower.level(k)?;
        for z in base_samples(tower, k, r, cfg, grid, grid)? {
            c = c.max(spectral_norm(&f.jacobian(z)?).ln().abs());
        }
    }
    Ok(c)
}
