use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{self, Step};
use crate::plot::{self, PlotKind};

/// Period-doubling renormalization of reversible area-preserving maps.
///
/// Every flag can also be set through the environment variable shown in
/// its help; flags beat the environment, which beats the config file.
#[derive(Debug, Parser)]
#[command(name = "renormlab", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML configuration; unknown keys are rejected.
    #[arg(long, global = true, env = "RENORMLAB_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, env = "RENORMLAB_OUT")]
    pub out: Option<PathBuf>,
    /// Run seed; goes before the subcommand.
    #[arg(long, env = "RENORMLAB_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Period-doubling parameters of the family and the accumulation point.
    Cascade {
        #[arg(long, env = "RENORMLAB_A_MIN", allow_hyphen_values = true)]
        a_min: Option<f64>,
        #[arg(long, env = "RENORMLAB_A_MAX", allow_hyphen_values = true)]
        a_max: Option<f64>,
        #[arg(long, env = "RENORMLAB_CASCADE_LEVELS")]
        levels: Option<usize>,
    },
    /// Newton solve for the renormalization fixed point.
    Fixedpoint {
        #[arg(long, env = "RENORMLAB_DEGREE")]
        degree: Option<usize>,
        #[arg(long, env = "RENORMLAB_TOL")]
        tol: Option<f64>,
    },
    /// Spectrum of the derivative of renormalization at the fixed point.
    Spectrum {
        #[arg(long, env = "RENORMLAB_SPECTRUM_STEP")]
        step: Option<f64>,
    },
    /// Renormalization tower over the fixed point with structural checks.
    Tower {
        #[arg(long, env = "RENORMLAB_TOWER_DEPTH")]
        depth: Option<usize>,
    },
    /// Pieces of the invariant Cantor set, geometry and Lyapunov exponents.
    Cantor {
        #[arg(long, env = "RENORMLAB_CANTOR_DEPTH")]
        depth: Option<usize>,
    },
    /// Conjugacies between Cantor sets: decay, Hölder exponents, oracles.
    Rigidity {
        #[arg(long, env = "RENORMLAB_NMAX")]
        nmax: Option<usize>,
        #[arg(long, env = "RENORMLAB_TMAX")]
        tmax: Option<f64>,
    },
    /// Monte-Carlo checks of the distortion bounds and cancellations.
    Distortion {
        #[arg(long, env = "RENORMLAB_DISTORTION_SAMPLES")]
        samples: Option<usize>,
        /// Seed of the Monte-Carlo draws; defaults to the run seed.
        #[arg(long = "seed", id = "distortion_seed", env = "RENORMLAB_DISTORTION_SEED")]
        distortion_seed: Option<u64>,
    },
    /// Aggregates every artifact present into report.json.
    Report,
    /// Runs every step in order.
    All,
    /// CSV table for plotting: pieces, decay, dimension, cascade, geometry,
    /// spectrum or distortion.
    Plot {
        kind: String,
        /// Piece depth for `pieces`.
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Prints the effective configuration as TOML.
    Config,
}

impl Cli {
    /// Configuration from the file, then the environment and flags.
    pub fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.global.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.global.out {
            cfg.out_dir = o.clone();
        }
        if let Some(s) = self.global.seed {
            cfg.seed = s;
        }
        match &self.command {
            Command::Cascade { a_min, a_max, levels } => {
                set(&mut cfg.family.a_min, *a_min);
                set(&mut cfg.family.a_max, *a_max);
                set(&mut cfg.cascade.levels, *levels);
            }
            Command::Fixedpoint { degree, tol } => {
                set(&mut cfg.renorm.degree, *degree);
                set(&mut cfg.newton.tol, *tol);
            }
            Command::Spectrum { step } => set(&mut cfg.spectrum.step, *step),
            Command::Tower { depth } => set(&mut cfg.tower.depth, *depth),
            Command::Cantor { depth } => set(&mut cfg.cantor.depth, *depth),
            Command::Rigidity { nmax, tmax } => {
                set(&mut cfg.rigidity.n_max, *nmax);
                set(&mut cfg.rigidity.t_max, *tmax);
            }
            Command::Distortion { samples, distortion_seed } => {
                set(&mut cfg.distortion.samples, *samples);
                if distortion_seed.is_some() {
                    cfg.distortion.seed = *distortion_seed;
                }
            }
            Command::Report | Command::All | Command::Plot { .. } | Command::Config => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn execute(&self) -> Result<()> {
        let cfg = self.config()?;
        let step = match &self.command {
            Command::Cascade { .. } => Step::Cascade,
            Command::Fixedpoint { .. } => Step::FixedPoint,
            Command::Spectrum { .. } => Step::Spectrum,
            Command::Tower { .. } => Step::Tower,
            Command::Cantor { .. } => Step::Cantor,
            Command::Rigidity { .. } => Step::Rigidity,
            Command::Distortion { .. } => Step::Distortion,
            Command::Report => Step::Report,
            Command::All => return pipeline::run_all(&cfg),
            Command::Plot { kind, depth, output } => {
                let kind: PlotKind = kind.parse()?;
                return match output {
                    Some(p) => {
                        let f = File::create(p).map_err(|e| CliError::io(format!("creating {}", p.display()), e))?;
                        plot::emit(&cfg.out_dir, kind, *depth, BufWriter::new(f))
                    }
                    None => plot::emit(&cfg.out_dir, kind, *depth, std::io::stdout().lock()),
                };
            }
            Command::Config => {
                let text = toml::to_string(&cfg).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
                print!("{text}");
                return Ok(());
            }
        };
        pipeline::run(step, &cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::try_parse_from(["renormlab", "--seed", "3", "distortion", "--seed", "9", "--samples", "50"]).unwrap();
        let cfg = cli.config().unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.distortion_seed(), 9);
        assert_eq!(cfg.distortion.samples, 50);
    }
}
