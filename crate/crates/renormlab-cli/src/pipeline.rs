//! One function per subcommand. Each reads its upstream artifacts from the
//! output directory, computes, and writes its own artifacts. Gates are
//! checked after writing so a failed run still leaves its numbers behind.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use renormlab::cantor::{
    box_dimension, build_pieces_at, choose_radius, diameter_decay, dimension_rows, lyapunov,
    lyapunov_constant, base_samples, DepthStats, DimensionFit, DimensionRow, DyadicWord, Piece,
};
use renormlab::distortion::{
    cancellation_suite, e_term, lemma_suite, CancellationReport, ChainFamily, DistortionReport, LemmaConstants,
};
use renormlab::map::{
    check_area, check_reversibility, conjugate_by_ht, pt, ChainMap, CoordinateChange, GenFunMap, Invertible, Point, Stage,
};
use renormlab::renorm::{
    cascade_bisection, dr_spectrum, newton_fixed_point, orbit_geometry, real_eigenvector, CascadeTable, Family,
    FixedPoint, GeometryLevel, Renormalizer, RenormTower, Scalings, Spectrum, Tail, ZoomSearch,
};
use renormlab::rigidity::{
    alpha0, cantor_samples, chain_jacobians, class_member, class_tower, decay_table, holder_fit, holder_pairs,
    noise_floor, optimize_kappa, ClassMember, ClassTower, Conjugator, DecayTable, HolderFit, ThetaBounds,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::store;

/// Subcommands that produce artifacts, in pipeline order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Cascade,
    FixedPoint,
    Spectrum,
    Tower,
    Cantor,
    Rigidity,
    Distortion,
    Report,
}

impl Step {
    pub const ALL: [Step; 8] = [
        Step::Cascade,
        Step::FixedPoint,
        Step::Spectrum,
        Step::Tower,
        Step::Cantor,
        Step::Rigidity,
        Step::Distortion,
        Step::Report,
    ];
}

/// Runs one step with a validated configuration.
pub fn run(step: Step, cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    match step {
        Step::Cascade => cascade(cfg).map(|_| ()),
        Step::FixedPoint => fixedpoint(cfg).map(|_| ()),
        Step::Spectrum => spectrum(cfg).map(|_| ()),
        Step::Tower => tower(cfg).map(|_| ()),
        Step::Cantor => cantor(cfg).map(|_| ()),
        Step::Rigidity => rigidity(cfg).map(|_| ()),
        Step::Distortion => distortion(cfg).map(|_| ()),
        Step::Report => report(cfg).map(|_| ()),
    }
}

/// Runs every step in order, stopping at the first failure.
pub fn run_all(cfg: &RunConfig) -> Result<()> {
    Step::ALL.iter().try_for_each(|s| run(*s, cfg))
}

fn dir(cfg: &RunConfig) -> &Path {
    &cfg.out_dir
}

fn renormalizer(cfg: &RunConfig) -> Result<Renormalizer> {
    Ok(Renormalizer::new(cfg.renorm.clone())?)
}

fn zoom_at(cfg: &RunConfig, fp: &FixedPoint) -> ZoomSearch {
    cfg.zoom.with_hint(fp.scalings.p)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CascadeArtifact {
    pub config: RunConfig,
    pub table: CascadeTable,
    /// Orbit geometry of the family member at the accumulation point.
    pub geometry: Vec<GeometryLevel>,
}

#[derive(Serialize)]
struct CascadeCsvRow {
    n: usize,
    a_n: f64,
    width: Option<f64>,
    ratio: Option<f64>,
}

pub fn cascade(cfg: &RunConfig) -> Result<CascadeArtifact> {
    let art = compute_cascade(cfg)?;
    store::write_json(dir(cfg), store::CASCADE, &art)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for l in &art.table.levels {
        w.serialize(CascadeCsvRow { n: l.n, a_n: l.a_n, width: l.width, ratio: l.ratio })?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io("buffering cascade.csv", e.into_error()))?;
    store::write_atomic(dir(cfg), store::CASCADE_CSV, &bytes)?;
    Ok(art)
}

fn compute_cascade(cfg: &RunConfig) -> Result<CascadeArtifact> {
    let table = cascade_bisection(&cfg.family, &cfg.cascade.library(), &cfg.zoom)?;
    let a_inf = accumulation(&table)?;
    let f = cfg.family.member(a_inf)?;
    let geometry = orbit_geometry(&f, cfg.cascade.geometry_levels, &cfg.zoom)?;
    Ok(CascadeArtifact { config: cfg.clone(), table, geometry })
}

fn accumulation(table: &CascadeTable) -> Result<f64> {
    table.a_inf.ok_or(CliError::Numerics(renormlab::Error::CascadeLost { level: table.levels.len() }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPointArtifact {
    pub config: RunConfig,
    pub a_inf: f64,
    pub fixed_point: FixedPoint,
}

/// Newton from the `seed_depth`-th renormalization of the family member at
/// the accumulation point. Uses `cascade.json` when present.
pub fn fixedpoint(cfg: &RunConfig) -> Result<FixedPointArtifact> {
    let a_inf = if store::exists(dir(cfg), store::CASCADE) {
        let c: CascadeArtifact = store::read_json(dir(cfg), store::CASCADE)?;
        accumulation(&c.table)?
    } else {
        accumulation(&cascade_bisection(&cfg.family, &cfg.cascade.library(), &cfg.zoom)?)?
    };
    let r = renormalizer(cfg)?;
    let mut f = cfg.family.member(a_inf)?;
    let mut z = cfg.zoom;
    for _ in 0..cfg.fixedpoint.seed_depth {
        let rf = r.renormalize(&f, &z)?;
        z = rf.next_zoom(&cfg.zoom);
        f = rf.map;
    }
    let fixed_point = newton_fixed_point(&r, &f, &cfg.zoom, &cfg.newton)?;
    let art = FixedPointArtifact { config: cfg.clone(), a_inf, fixed_point };
    store::write_json(dir(cfg), store::FSTAR, &art)?;
    Ok(art)
}

fn load_fixed_point(cfg: &RunConfig) -> Result<FixedPoint> {
    let a: FixedPointArtifact = store::read_json(dir(cfg), store::FSTAR)?;
    let have = a.fixed_point.map.genfun().degree();
    if have != cfg.renorm.degree {
        return Err(CliError::ConfigInvalid(format!(
            "fstar.json holds a degree-{have} fixed point but renorm.degree is {}",
            cfg.renorm.degree
        )));
    }
    Ok(a.fixed_point)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumArtifact {
    pub config: RunConfig,
    pub spectrum: Spectrum,
    pub unstable_count: usize,
    /// Relative change of the leading eigenvalues when the step is halved.
    pub halving_change: Vec<f64>,
    /// Unit eigenvector of `delta` in coefficient space.
    pub unstable: Vec<f64>,
    /// Unit eigenvector of the leading stable eigenvalue.
    pub stable: Vec<f64>,
}

const HALVING_TOP: usize = 5;

pub fn spectrum(cfg: &RunConfig) -> Result<SpectrumArtifact> {
    let fp = load_fixed_point(cfg)?;
    let r = renormalizer(cfg)?;
    let step = cfg.spectrum.step;
    let (sp, dr) = dr_spectrum(&r, &fp, &cfg.zoom, step)?;
    let (half, _) = dr_spectrum(&r, &fp, &cfg.zoom, 0.5 * step)?;
    let halving_change = sp
        .eigenvalues
        .iter()
        .zip(&half.eigenvalues)
        .take(HALVING_TOP)
        .map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1) / a.0.hypot(a.1))
        .collect();
    let unstable_count = sp.eigenvalues.iter().filter(|e| e.0.hypot(e.1) > 1.0).count();
    let unstable = real_eigenvector(&dr, sp.delta)?;
    if sp.nu_value.1 != 0.0 {
        return Err(CliError::Gate(format!("leading stable eigenvalue is complex: {:?}", sp.nu_value)));
    }
    let stable = real_eigenvector(&dr, sp.nu_value.0)?;
    let art = SpectrumArtifact {
        config: cfg.clone(),
        spectrum: sp,
        unstable_count,
        halving_change,
        unstable: unstable.as_slice().to_vec(),
        stable: stable.as_slice().to_vec(),
    };
    store::write_json(dir(cfg), store::SPECTRUM, &art)?;
    if unstable_count != 1 {
        return Err(CliError::Gate(format!("{unstable_count} eigenvalues of modulus > 1, expected exactly one")));
    }
    Ok(art)
}

/// Structural checks of one refitted level `R^k F*`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelCheck {
    pub k: usize,
    pub scalings: Scalings,
    /// Largest coefficient change from `F*`.
    pub drift: f64,
    pub det_defect: f64,
    pub rev_defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerArtifact {
    pub config: RunConfig,
    /// Base-piece radius used by every downstream step.
    pub radius: f64,
    /// The tower over `F*` used downstream: every level is `F*`.
    pub tower: RenormTower,
    /// Levels of the refitted tower `R^k F*`.
    pub levels: Vec<LevelCheck>,
}

fn genfun_level(chain: &ChainMap) -> Option<&GenFunMap> {
    match chain.stages() {
        [Stage::Genfun { map }] => Some(map),
        _ => None,
    }
}

pub fn tower(cfg: &RunConfig) -> Result<TowerArtifact> {
    let fp = load_fixed_point(cfg)?;
    let r = renormalizer(cfg)?;
    let refit = RenormTower::genfun(&r, &fp.map, cfg.tower.depth, &zoom_at(cfg, &fp))?;
    let mut levels = Vec::with_capacity(cfg.tower.depth + 1);
    for k in 0..=cfg.tower.depth {
        let map = genfun_level(refit.level(k)?).expect("refitted levels are generating-function maps");
        let grid = map.domain_grid(cfg.tower.check_grid);
        levels.push(LevelCheck {
            k,
            scalings: refit.scalings(k)?,
            drift: map.genfun().max_coeff_diff(fp.map.genfun()),
            det_defect: check_area(map, &grid)?,
            rev_defect: check_reversibility(map, &grid)?,
        });
    }
    let tower = RenormTower::stationary(&fp);
    let radius = choose_radius(&tower, 1, &cfg.cantor.pieces)?;
    let art = TowerArtifact { config: cfg.clone(), radius, tower, levels };
    store::write_json(dir(cfg), store::TOWER, &art)?;
    let tol = cfg.tower.check_tol;
    if let Some(bad) = art.levels.iter().find(|l| !(l.det_defect <= tol && l.rev_defect <= tol)) {
        return Err(CliError::Gate(format!(
            "level {}: |det DF - 1| = {:.3e}, |TFTF - id| = {:.3e} exceed {tol:.1e}",
            bad.k, bad.det_defect, bad.rev_defect
        )));
    }
    Ok(art)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiameterFit {
    pub first_depth: usize,
    pub last_depth: usize,
    pub factor: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dimension {
    pub rows: Vec<DimensionRow>,
    pub fit: DimensionFit,
}

/// Growth exponents along adding-machine orbits against the bound
/// `C_obs / 2^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovCheck {
    pub n: u32,
    pub orbits: usize,
    pub c_obs: f64,
    pub bound: f64,
    pub exponents: Vec<f64>,
    pub max_abs: f64,
    pub pass: bool,
}

/// Absolute bound on the exponent, independent of `C_obs`.
pub const LYAPUNOV_ABS: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CantorArtifact {
    pub config: RunConfig,
    pub depth: usize,
    pub radius: f64,
    pub stats: Vec<DepthStats>,
    pub diameter: DiameterFit,
    pub dimension: Dimension,
    pub lyapunov: LyapunovCheck,
}

pub fn cantor(cfg: &RunConfig) -> Result<CantorArtifact> {
    let t: TowerArtifact = store::read_json(dir(cfg), store::TOWER)?;
    let c = &cfg.cantor;
    let ca = build_pieces_at(&t.tower, c.depth, t.radius, &c.pieces)?;
    let (factor, constant) = diameter_decay(&ca.stats, c.fit_lo, c.depth);
    let rows = dimension_rows(&ca);
    let fit = box_dimension(&rows, c.fit_lo, c.depth)?;
    let lyap = lyapunov_check(cfg, &t)?;

    let mut pieces: Vec<&Piece> = ca.levels.iter().flatten().collect();
    pieces.sort_by_cached_key(|p| (p.depth, p.word.to_string()));
    store::write_jsonl(dir(cfg), store::PIECES, &pieces)?;

    let art = CantorArtifact {
        config: cfg.clone(),
        depth: c.depth,
        radius: t.radius,
        stats: ca.stats,
        diameter: DiameterFit { first_depth: c.fit_lo, last_depth: c.depth, factor, constant },
        dimension: Dimension { rows, fit },
        lyapunov: lyap,
    };
    store::write_json(dir(cfg), store::CANTOR, &art)?;
    Ok(art)
}

fn lyapunov_check(cfg: &RunConfig, t: &TowerArtifact) -> Result<LyapunovCheck> {
    let c = &cfg.cantor;
    let f = t.tower.level(0)?;
    let words = cantor_samples(&t.tower, c.lyapunov_word_len, c.lyapunov_orbits, cfg.seed)?;
    let exponents: Vec<f64> = words.iter().map(|(_, x)| lyapunov(f, *x, c.lyapunov_n)).collect::<renormlab::Result<_>>()?;
    let c_obs = lyapunov_constant(&t.tower, 0, t.radius, &c.pieces, c.lyapunov_grid)?;
    let bound = c_obs / 2f64.powi(c.lyapunov_n as i32);
    let max_abs = exponents.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(LyapunovCheck {
        n: c.lyapunov_n,
        orbits: c.lyapunov_orbits,
        c_obs,
        bound,
        exponents,
        max_abs,
        pass: max_abs <= bound && max_abs <= LYAPUNOV_ABS,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MemberSummary {
    pub eps: f64,
    pub shot: f64,
    /// Sampled `C^2` distance to `F*` over the whole domain.
    pub distance: f64,
    /// Sampled `C^2` distance between the length-four chains on the base pieces.
    pub chain_distance: f64,
}

/// Checks against the exactly conjugate pair `F*`, `h_t^{-1} F* h_t`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoordinateCheck {
    pub t: f64,
    pub n: usize,
    pub samples: usize,
    /// `max |h_n(x) - h_t^{-1}(x)|`.
    pub oracle_error: f64,
    pub seeded_n: usize,
    /// Value and derivative error of the seeded conjugacy.
    pub seeded_error: f64,
    pub holder: HolderFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RigidityArtifact {
    pub config: RunConfig,
    pub radius: f64,
    pub theta: ThetaBounds,
    pub nu: f64,
    /// `theta2 nu / theta1`.
    pub theta_ratio: f64,
    pub alpha0: f64,
    pub member: MemberSummary,
    pub restarts: Vec<(usize, f64)>,
    pub decay: DecayTable,
    pub holder: HolderFit,
    pub coordinate: CoordinateCheck,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassTowerArtifact {
    pub config: RunConfig,
    pub member: ClassMember,
    pub class_tower: ClassTower,
}

pub fn rigidity(cfg: &RunConfig) -> Result<RigidityArtifact> {
    let t: TowerArtifact = store::read_json(dir(cfg), store::TOWER)?;
    let s: SpectrumArtifact = store::read_json(dir(cfg), store::SPECTRUM)?;
    let fp = load_fixed_point(cfg)?;
    let rc = &cfg.rigidity;
    let pcfg = &cfg.cantor.pieces;
    let (tw, r) = (&t.tower, t.radius);

    let pts = base_samples(tw, 4, r, pcfg, rc.theta_grid.0, rc.theta_grid.1)?;
    let jacs = chain_jacobians(tw, 0, &pts)?;
    let theta = optimize_kappa(&jacs, rc.kappa_lo, rc.kappa_hi, rc.kappa_steps, pts.len());
    let nu = s.spectrum.nu;
    let a0 = alpha0(theta.theta1, theta.theta2, nu)?;

    let rz = renormalizer(cfg)?;
    let stable = DVector::from_vec(s.stable.clone());
    let unstable = DVector::from_vec(s.unstable.clone());
    let member = class_member(&rz, &fp, &stable, &unstable, rc.eps, rc.shoot_depth, &cfg.zoom)?;
    let ct = class_tower(&rz, &fp, &member, &unstable, rc.class_depth, rc.block, &cfg.zoom)?;
    let chain_distance = ChainFamily::from_towers(tw, Some(&ct.tower), r, pcfg)?
        .constants(cfg.distortion.grid)?
        .c2_distance;

    let smp = cantor_samples(tw, rc.sample_len, rc.samples, cfg.seed)?;
    let floor = noise_floor(tw, &smp, rc.n_max, r, pcfg)?;
    let conj = Conjugator::new(tw, &ct.tower, rc.n_max, r, pcfg)?;
    let decay = decay_table(&conj, &smp, rc.n_max, floor, member.distance)?;
    let pairs = holder_pairs(&conj, tw, rc.n_max, rc.sample_len, 0..rc.holder_scales, rc.holder_per_scale, cfg.seed)?;
    let holder = holder_fit(&pairs, floor.1, rc.holder_min_scales)?;

    let coordinate = coordinate_check(cfg, &fp, tw, r, &smp, floor.1)?;

    let art = RigidityArtifact {
        config: cfg.clone(),
        radius: r,
        theta,
        nu,
        theta_ratio: theta.theta2 * nu / theta.theta1,
        alpha0: a0,
        member: MemberSummary { eps: member.eps, shot: member.shot, distance: member.distance, chain_distance },
        restarts: ct.restarts.clone(),
        decay,
        holder,
        coordinate,
    };
    store::write_json(
        dir(cfg),
        store::CLASS_TOWER,
        &ClassTowerArtifact { config: cfg.clone(), member, class_tower: ct },
    )?;
    store::write_json(dir(cfg), store::RIGIDITY, &art)?;
    Ok(art)
}

fn coordinate_check(
    cfg: &RunConfig,
    fp: &FixedPoint,
    tw: &RenormTower,
    radius: f64,
    smp: &[(DyadicWord, Point)],
    floor: f64,
) -> Result<CoordinateCheck> {
    let rc = &cfg.rigidity;
    let pcfg = &cfg.cantor.pieces;
    let zoom = zoom_at(cfg, fp);
    let h = CoordinateChange::new(rc.t);
    let base = Arc::new(fp.map.clone());
    let conj_tower = RenormTower::pointwise(conjugate_by_ht(base.clone(), rc.t)?, rc.ht_depth, &zoom)?
        .with_tail(Tail::from_fixed(fp));
    let oracle = Conjugator::new(tw, &conj_tower, rc.n_max, radius, pcfg)?;
    let mut oracle_error: f64 = 0.0;
    for (w, x) in smp.iter().take(rc.oracle_samples) {
        let (v, _) = oracle.eval(rc.n_max, w, *x)?;
        oracle_error = oracle_error.max((v - h.inverse_apply(*x)?).norm());
    }

    // Both towers pointwise, so that the seeded conjugacy carries the same
    // rounding on both sides.
    let ptw = RenormTower::pointwise(ChainMap::single(base), rc.ht_depth, &zoom)?.with_tail(Tail::from_fixed(fp));
    let seeded = Conjugator::new(&ptw, &conj_tower, rc.n_max, radius, pcfg)?.with_coordinate_seed(rc.t);
    let psmp = cantor_samples(&ptw, rc.sample_len, rc.oracle_samples, cfg.seed)?;
    let mut seeded_error: f64 = 0.0;
    for (w, x) in &psmp {
        let (v, dv) = seeded.eval(rc.seeded_n, w, *x)?;
        let (ev, edv) = h.inverse_apply_jac(*x)?;
        seeded_error = seeded_error.max((v - ev).norm()).max((dv - edv).norm());
    }
    let pairs = holder_pairs(&seeded, &ptw, rc.seeded_n, rc.sample_len, 0..rc.holder_scales, rc.holder_per_scale, cfg.seed)?;
    let holder = holder_fit(&pairs, floor, rc.holder_min_scales)?;
    Ok(CoordinateCheck {
        t: rc.t,
        n: rc.n_max,
        samples: rc.oracle_samples,
        oracle_error,
        seeded_n: rc.seeded_n,
        seeded_error,
        holder,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionArtifact {
    pub config: RunConfig,
    pub seed: u64,
    pub constants: LemmaConstants,
    pub reports: Vec<DistortionReport>,
    pub cancellation: CancellationReport,
    /// `max |E(x, x)|` over the patch centres and corners; zero by construction.
    pub diagonal: f64,
}

pub fn distortion(cfg: &RunConfig) -> Result<DistortionArtifact> {
    let t: TowerArtifact = store::read_json(dir(cfg), store::TOWER)?;
    let ct: ClassTowerArtifact = store::read_json(dir(cfg), store::CLASS_TOWER)?;
    let d = &cfg.distortion;
    let seed = cfg.distortion_seed();
    let fam = ChainFamily::from_towers(&t.tower, Some(&ct.class_tower.tower), t.radius, &cfg.cantor.pieces)?;
    let constants = fam.constants(d.grid)?;
    let reports = lemma_suite(&fam, &constants, d.samples, d.safety, seed)?;
    let cancellation = cancellation_suite(&fam, d.cancellation_samples, seed)?;
    let mut diagonal: f64 = 0.0;
    for p in &fam.patches {
        let b = p.domain;
        let mid = pt(0.5 * (b.x_lo + b.x_hi), 0.5 * (b.u_lo + b.u_hi));
        for z in [mid, pt(b.x_lo, b.u_lo), pt(b.x_hi, b.u_hi)] {
            diagonal = diagonal.max(e_term(&p.psi, z, z)?.amax());
        }
    }
    let art = DistortionArtifact { config: cfg.clone(), seed, constants, reports, cancellation, diagonal };
    store::write_json(dir(cfg), store::DISTORTION, &art)?;
    let violations: usize = art.reports.iter().map(|r| r.violations).sum();
    if violations > 0 {
        return Err(CliError::Gate(format!("{violations} distortion bound violations")));
    }
    let rel = art.cancellation.max_relative_e.max(art.cancellation.max_relative_ed);
    if !(rel <= d.cancellation_tol) {
        return Err(CliError::Gate(format!("cancellation residual {rel:.3e} exceeds {:.1e}", d.cancellation_tol)));
    }
    if art.diagonal != 0.0 {
        return Err(CliError::Gate(format!("E(x, x) = {:.3e} is not zero", art.diagonal)));
    }
    Ok(art)
}

/// Every JSON artifact present, embedded unchanged, with a summary of the
/// headline numbers copied out of them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub config: RunConfig,
    pub artifacts: serde_json::Map<String, Value>,
    pub missing: Vec<String>,
    pub summary: serde_json::Map<String, Value>,
}

pub const REPORTED: [&str; 8] = [
    store::CASCADE,
    store::FSTAR,
    store::SPECTRUM,
    store::TOWER,
    store::CANTOR,
    store::RIGIDITY,
    store::CLASS_TOWER,
    store::DISTORTION,
];

/// `(summary key, artifact, JSON pointer)`.
pub const SUMMARY_FIELDS: [(&str, &str, &str); 22] = [
    ("a_inf", store::CASCADE, "/table/a_inf"),
    ("lambda", store::FSTAR, "/fixed_point/scalings/lambda"),
    ("mu", store::FSTAR, "/fixed_point/scalings/mu"),
    ("fixed_point_distance", store::FSTAR, "/fixed_point/distance"),
    ("fixed_point_residual", store::FSTAR, "/fixed_point/residual"),
    ("delta", store::SPECTRUM, "/spectrum/delta"),
    ("rho_t", store::SPECTRUM, "/spectrum/rho_t"),
    ("nu", store::SPECTRUM, "/spectrum/nu"),
    ("unstable_count", store::SPECTRUM, "/unstable_count"),
    ("theta1", store::RIGIDITY, "/theta/theta1"),
    ("theta2", store::RIGIDITY, "/theta/theta2"),
    ("theta_ratio", store::RIGIDITY, "/theta_ratio"),
    ("alpha0", store::RIGIDITY, "/alpha0"),
    ("holder_alpha", store::RIGIDITY, "/holder/alpha"),
    ("coordinate_holder_alpha", store::RIGIDITY, "/coordinate/holder/alpha"),
    ("coordinate_oracle_error", store::RIGIDITY, "/coordinate/oracle_error"),
    ("diameter_factor", store::CANTOR, "/diameter/factor"),
    ("box_dimension", store::CANTOR, "/dimension/fit/estimate"),
    ("lyapunov_max", store::CANTOR, "/lyapunov/max_abs"),
    ("lyapunov_pass", store::CANTOR, "/lyapunov/pass"),
    ("cancellation_relative_e", store::DISTORTION, "/cancellation/max_relative_e"),
    ("cancellation_relative_ed", store::DISTORTION, "/cancellation/max_relative_ed"),
];

pub fn report(cfg: &RunConfig) -> Result<ReportArtifact> {
    let mut artifacts = serde_json::Map::new();
    let mut missing = Vec::new();
    for name in REPORTED {
        if store::exists(dir(cfg), name) {
            artifacts.insert(name.to_string(), store::read_json::<Value>(dir(cfg), name)?);
        } else {
            missing.push(name.to_string());
        }
    }
    let mut summary = serde_json::Map::new();
    for (key, name, ptr) in SUMMARY_FIELDS {
        if let Some(v) = artifacts.get(name).and_then(|a| a.pointer(ptr)) {
            summary.insert(key.to_string(), v.clone());
        }
    }
    if let Some(Value::Array(rows)) = artifacts.get(store::RIGIDITY).and_then(|a| a.pointer("/decay/rows")) {
        summary.insert("decay_ratios".into(), Value::Array(rows.iter().filter_map(|r| r.get("ratio").cloned()).collect()));
    }
    if let Some(Value::Array(reps)) = artifacts.get(store::DISTORTION).and_then(|a| a.get("reports")) {
        let total: u64 = reps.iter().filter_map(|r| r.get("violations").and_then(Value::as_u64)).sum();
        summary.insert("distortion_violations".into(), Value::from(total));
    }
    let art = ReportArtifact { config: cfg.clone(), artifacts, missing, summary };
    store::write_json(dir(cfg), store::REPORT, &art)?;
    Ok(art)
}
