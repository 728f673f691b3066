use std::path::{Path, PathBuf};

use renormlab::cantor::PieceConfig;
use renormlab::renorm::{CascadeConfig, KickedFamily, NewtonConfig, RenormConfig, ZoomSearch};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Everything a run depends on. Echoed verbatim into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Seed for every random draw of the run.
    pub seed: u64,
    pub family: KickedFamily,
    pub renorm: RenormConfig,
    pub zoom: ZoomSearch,
    pub newton: NewtonConfig,
    pub cascade: CascadeSection,
    pub fixedpoint: FixedPointSection,
    pub spectrum: SpectrumSection,
    pub tower: TowerSection,
    pub cantor: CantorSection,
    pub rigidity: RigiditySection,
    pub distortion: DistortionSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seed: 7,
            family: KickedFamily::default(),
            renorm: RenormConfig::default(),
            zoom: ZoomSearch::default(),
            newton: NewtonConfig::default(),
            cascade: CascadeSection::default(),
            fixedpoint: FixedPointSection::default(),
            spectrum: SpectrumSection::default(),
            tower: TowerSection::default(),
            cantor: CantorSection::default(),
            rigidity: RigiditySection::default(),
            distortion: DistortionSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeSection {
    pub levels: usize,
    pub width_tol: f64,
    /// Nested on-axis orbits measured at the accumulation point.
    pub geometry_levels: usize,
}

impl Default for CascadeSection {
    fn default() -> Self {
        let c = CascadeConfig::default();
        Self { levels: c.levels, width_tol: c.width_tol, geometry_levels: 6 }
    }
}

impl CascadeSection {
    pub fn library(&self) -> CascadeConfig {
        CascadeConfig { levels: self.levels, width_tol: self.width_tol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSection {
    /// Renormalizations of the family member at the accumulation point
    /// before Newton starts.
    pub seed_depth: usize,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        Self { seed_depth: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub step: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { step: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TowerSection {
    pub depth: usize,
    /// Side of the grid for the area and reversibility checks.
    pub check_grid: usize,
    pub check_tol: f64,
}

impl Default for TowerSection {
    fn default() -> Self {
        Self { depth: 9, check_grid: 20, check_tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CantorSection {
    pub depth: usize,
    pub pieces: PieceConfig,
    /// First depth of the diameter and dimension fits.
    pub fit_lo: usize,
    pub lyapunov_orbits: usize,
    /// Orbits run for `2^lyapunov_n` steps.
    pub lyapunov_n: u32,
    pub lyapunov_word_len: usize,
    pub lyapunov_grid: usize,
}

impl Default for CantorSection {
    fn default() -> Self {
        Self {
            depth: 10,
            pieces: PieceConfig::default(),
            fit_lo: 4,
            lyapunov_orbits: 20,
            lyapunov_n: 12,
            lyapunov_word_len: 13,
            lyapunov_grid: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigiditySection {
    pub n_max: usize,
    /// Size of the stable-direction perturbation of the class member.
    pub eps: f64,
    pub shoot_depth: usize,
    pub class_depth: usize,
    /// Levels between re-shoots of the class tower.
    pub block: usize,
    pub t: f64,
    pub t_max: f64,
    /// Depth of the pointwise towers of `F*` and its `h_t` conjugate.
    pub ht_depth: usize,
    /// Level of the coordinate-seeded conjugacy.
    pub seeded_n: usize,
    pub samples: usize,
    pub sample_len: usize,
    pub oracle_samples: usize,
    pub holder_scales: usize,
    pub holder_per_scale: usize,
    pub holder_min_scales: usize,
    pub theta_grid: (usize, usize),
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub kappa_steps: usize,
}

impl Default for RigiditySection {
    fn default() -> Self {
        Self {
            n_max: 2,
            eps: 1e-2,
            shoot_depth: 6,
            class_depth: 9,
            block: 4,
            t: 0.02,
            t_max: 0.05,
            ht_depth: 8,
            seeded_n: 1,
            samples: 200,
            sample_len: 13,
            oracle_samples: 50,
            holder_scales: 8,
            holder_per_scale: 40,
            holder_min_scales: 4,
            theta_grid: (25, 20),
            kappa_lo: 0.05,
            kappa_hi: 20.0,
            kappa_steps: 121,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistortionSection {
    pub samples: usize,
    pub safety: f64,
    /// Side of the grid for the derivative constants.
    pub grid: usize,
    pub cancellation_samples: usize,
    pub cancellation_tol: f64,
    /// Overrides the run seed for the Monte-Carlo suites.
    pub seed: Option<u64>,
}

impl Default for DistortionSection {
    fn default() -> Self {
        Self { samples: 10_000, safety: 4.0, grid: 12, cancellation_samples: 1000, cancellation_tol: 1e-9, seed: None }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn distortion_seed(&self) -> u64 {
        self.distortion.seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.family;
        if !(f.a_min < f.a_max) {
            return Err(invalid("family.a_min must be below family.a_max"));
        }
        if self.renorm.degree < 4 {
            return Err(invalid("renorm.degree must be at least 4"));
        }
        if !(self.newton.tol > 0.0) {
            return Err(invalid("newton.tol must be positive"));
        }
        if self.cascade.levels < 3 {
            return Err(invalid("cascade.levels must be at least 3 for an extrapolated accumulation point"));
        }
        if self.cascade.geometry_levels < 2 {
            return Err(invalid("cascade.geometry_levels must be at least 2"));
        }
        if !(self.spectrum.step > 0.0) {
            return Err(invalid("spectrum.step must be positive"));
        }
        if self.tower.depth == 0 {
            return Err(invalid("tower.depth must be positive"));
        }
        let c = &self.cantor;
        if c.depth == 0 || c.depth > 16 {
            return Err(invalid("cantor.depth must lie in 1..=16"));
        }
        if c.fit_lo + 1 > c.depth {
            return Err(invalid("cantor.fit_lo must leave at least two depths to fit"));
        }
        if c.lyapunov_word_len == 0 || c.lyapunov_word_len > 63 {
            return Err(invalid("cantor.lyapunov_word_len must lie in 1..=63"));
        }
        let r = &self.rigidity;
        if r.n_max == 0 {
            return Err(invalid("rigidity.n_max must be positive"));
        }
        if r.seeded_n > r.n_max {
            return Err(invalid("rigidity.seeded_n cannot exceed rigidity.n_max"));
        }
        if !(r.t_max > 0.0) || !(r.t.abs() <= r.t_max) {
            return Err(invalid(format!("rigidity.t = {} must satisfy |t| <= t_max = {}", r.t, r.t_max)));
        }
        if !(r.eps > 0.0) {
            return Err(invalid("rigidity.eps must be positive"));
        }
        if r.block == 0 || r.class_depth < r.shoot_depth {
            return Err(invalid("rigidity.block must be positive and class_depth at least shoot_depth"));
        }
        if r.samples == 0 || r.oracle_samples > r.samples {
            return Err(invalid("rigidity.oracle_samples must not exceed rigidity.samples"));
        }
        if r.sample_len == 0 || r.sample_len > 63 || r.holder_scales > r.sample_len {
            return Err(invalid("rigidity.sample_len must lie in 1..=63 and cover holder_scales"));
        }
        if !(r.kappa_lo > 0.0 && r.kappa_lo < r.kappa_hi) {
            return Err(invalid("rigidity.kappa_lo must be positive and below kappa_hi"));
        }
        let d = &self.distortion;
        if d.samples == 0 || d.cancellation_samples == 0 {
            return Err(invalid("distortion sample counts must be positive"));
        }
        if !(d.safety >= 1.0) {
            return Err(invalid("distortion.safety must be at least 1"));
        }
        Ok(())
    }
}
