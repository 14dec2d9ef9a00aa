mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sqd_core::lab::{ExperimentConfig, Method, NoiseConfig};
use sqd_core::mitigate::Mitigation;
use sqd_core::BasisKind;

#[derive(Parser, Debug)]
#[command(name = "sqdlab", version, about = "Sample-based quantum diagonalization lab for cuprate chains")]
pub struct Cli {
    /// Experiment configuration (JSON); defaults are used for missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings layered over the configuration file.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub plaquettes: Option<usize>,
    /// IDEAL_SQD, UCJ or LUCJ.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// Jastrow layers.
    #[arg(long, global = true)]
    pub r: Option<usize>,
    /// HF, KIN or HFPLUS.
    #[arg(long, global = true)]
    pub basis: Option<BasisKind>,
    #[arg(long, global = true)]
    pub topology: Option<String>,
    /// Chain integrals file used instead of the built-in model.
    #[arg(long, global = true)]
    pub integrals: Option<PathBuf>,
    #[arg(long, global = true)]
    pub master_shots: Option<u64>,
    #[arg(long, global = true)]
    pub batches: Option<usize>,
    /// Enable read-out noise with this flip probability.
    #[arg(long, global = true)]
    pub p_flip: Option<f64>,
    /// Enable read-out noise calibrated to this correct-number fraction.
    #[arg(long, global = true)]
    pub noise_target: Option<f64>,
    /// none, postselect or recover; enables noise when given.
    #[arg(long, global = true)]
    pub mitigation: Option<Mitigation>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the chain integrals (integrals.json).
    BuildChain {
        /// Drop the Coulomb terms between plaquettes.
        #[arg(long)]
        no_interplaquette_coulomb: bool,
    },
    /// Solve for the HF and configured orbital bases (bases.json).
    Bases,
    /// Cluster-Jastrow parameters, circuit and gate census.
    UcjParams {
        /// Bins of the controlled-phase angle histogram.
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Simulate a circuit in the configured sector (state.csv).
    Simulate {
        /// Circuit text file; built from the configuration when absent.
        #[arg(long)]
        circuit: Option<PathBuf>,
    },
    /// Draw measurement outcomes (samples.csv).
    Sample {
        #[arg(long)]
        circuit: Option<PathBuf>,
        /// Overrides master_shots for this draw.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Apply read-out error mitigation to a sample file (mitigated.csv).
    Mitigate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = RecoverMode::Greedy)]
        mode: RecoverMode,
    },
    /// Selected-CI energy in the span of sampled determinants (sci.json).
    Sci {
        /// Sample file whose sector-valid outcomes form the basis.
        #[arg(long, conflicts_with = "dets")]
        samples: Option<PathBuf>,
        /// Determinant list (alpha_hex,beta_hex per line).
        #[arg(long, required_unless_present = "samples")]
        dets: Option<PathBuf>,
        /// Also solve full CI and report the error against it.
        #[arg(long)]
        reference: bool,
    },
    /// Convergence curve over the shot schedule (curve.csv, meta.json).
    Convergence,
    /// Convergence runs over several chain lengths (scaling.csv).
    Scaling {
        #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
        lengths: Vec<usize>,
    },
    /// Singlet–triplet gap and orbital densities by full CI (spin_gap.json).
    SpinGap {
        #[arg(long)]
        no_interplaquette_coulomb: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoverMode {
    Greedy,
    Probabilistic,
}

impl Cli {
    /// The configuration file (or defaults) with command-line overrides applied.
    pub fn resolve_config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(2, Method::IdealSqd),
        };
        let o = &self.overrides;
        if let Some(l) = o.plaquettes {
            cfg.chain.plaquettes = l;
        }
        if let Some(m) = o.method {
            cfg.method = m;
        }
        if let Some(r) = o.r {
            cfg.r = r;
        }
        if let Some(b) = o.basis {
            cfg.basis_kind = b;
        }
        if let Some(t) = &o.topology {
            cfg.topology = t.clone();
        }
        if let Some(path) = &o.integrals {
            cfg.integrals = Some(path.display().to_string());
        }
        if let Some(s) = o.master_shots {
            cfg.master_shots = s;
        }
        if let Some(b) = o.batches {
            cfg.batches = b;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if o.p_flip.is_some() || o.noise_target.is_some() || o.mitigation.is_some() {
            let noise = cfg.noise.get_or_insert_with(NoiseConfig::default);
            if let Some(p) = o.p_flip {
                noise.p_flip = Some(p);
            }
            if let Some(t) = o.noise_target {
                noise.target_correct_fraction = t;
                noise.p_flip = None;
            }
            if let Some(m) = o.mitigation {
                noise.mitigation = m;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = commands::run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
