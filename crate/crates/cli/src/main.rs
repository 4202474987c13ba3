//! `linespec` — command-line harness for line-spectrum super resolution.
//!
//! Subcommands: `generate` (write seeded trial files), `denoise` (atomic
//! norm denoising of one observation), `localize` (spike estimates from one
//! observation), `bench` (Monte Carlo sweep to CSV/JSON), `dualpoly`
//! (dual-polynomial samples for plotting).

use anyhow::{Context, Result, bail};
use clap::{Args, Parser, Subcommand};
use linespec::admm::{self, AdmmOpts};
use linespec::harness::{self, ExperimentConfig, Method};
use linespec::localization;
use linespec::signal::NoisyObservation;
use serde::Serialize;
use std::fs::File;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "linespec", version, about = "Line-spectrum super resolution via atomic norm minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of a JSON experiment config.
#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let file = File::open(&self.config)
            .with_context(|| format!("opening {}", self.config.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_reader(file).context("parsing experiment config")?;
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate().context("invalid experiment config")?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write one JSON file per (SNR, trial) with the ground truth and its
    /// noisy observation.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Atomic norm denoising of a serialized observation.
    Denoise {
        /// Observation file (JSON, as written by `generate`).
        #[arg(long)]
        input: PathBuf,
        /// Regularization weight; defaults to `1.2·σ·√(n log n)` from the
        /// observation's recorded noise level.
        #[arg(long)]
        lambda: Option<f64>,
        /// Solver options file (JSON: rho, tol_abs, tol_rel, max_iter,
        /// adaptive_rho).
        #[arg(long)]
        opts: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spike estimates for a serialized observation (denoise + dual
    /// polynomial peaks + amplitude least squares).
    Localize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        opts: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo sweep over the config's method × SNR grid; writes
    /// records.csv, aggregates.csv and sweep.json.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dual-polynomial samples of trial 0 for plotting; writes
    /// dualpoly.csv and dualpoly.json.
    Dualpoly {
        #[command(flatten)]
        config: ConfigArgs,
        /// Method whose dual to plot (must be an ADMM-family method).
        #[arg(long, default_value = "anm-admm")]
        method: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_observation(path: &Path) -> Result<NoisyObservation> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    // accept either a bare observation or a generated-trial wrapper
    let value: serde_json::Value = serde_json::from_reader(file).context("parsing JSON")?;
    if let Some(obs) = value.get("observation") {
        Ok(serde_json::from_value(obs.clone()).context("parsing embedded observation")?)
    } else {
        Ok(serde_json::from_value(value).context("parsing observation")?)
    }
}

fn read_opts(path: &Option<PathBuf>) -> Result<AdmmOpts> {
    match path {
        None => Ok(AdmmOpts::default()),
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(serde_json::from_reader(file).context("parsing solver options")?)
        }
    }
}

fn resolve_lambda(z: &NoisyObservation, lambda: Option<f64>) -> Result<f64> {
    match lambda {
        Some(l) if l > 0.0 => Ok(l),
        Some(l) => bail!("lambda {l} must be positive"),
        None => {
            if z.sigma <= 0.0 {
                bail!("observation has sigma = 0; pass --lambda explicitly");
            }
            Ok(harness::lambda_rule(1.2, z.sigma, z.data.len()))
        }
    }
}

fn write_output<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            serde_json::to_writer_pretty(file, value)?;
        }
        None => {
            serde_json::to_writer_pretty(std::io::stdout().lock(), value)?;
            println!();
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DenoiseOutput {
    lambda: f64,
    x_hat: NoisyObservation,
    report: admm::SolveReport,
}

fn parse_method(name: &str) -> Result<Method> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .with_context(|| format!("unknown method {name:?}"))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { config, out } => {
            let cfg = config.load()?;
            let paths = harness::generate(&cfg, &out)?;
            eprintln!("wrote {} trial files to {}", paths.len(), out.display());
        }
        Command::Denoise {
            input,
            lambda,
            opts,
            out,
        } => {
            let z = read_observation(&input)?;
            let lambda = resolve_lambda(&z, lambda)?;
            let opts = read_opts(&opts)?;
            let res = admm::denoise(&z, lambda, &opts)?;
            let output = DenoiseOutput {
                lambda,
                x_hat: NoisyObservation {
                    data: res.x_hat,
                    sigma: z.sigma,
                    seed: z.seed,
                },
                report: res.report,
            };
            write_output(&output, &out)?;
        }
        Command::Localize {
            input,
            lambda,
            opts,
            out,
        } => {
            let z = read_observation(&input)?;
            let opts = read_opts(&opts)?;
            let estimate = if z.sigma == 0.0 && lambda.is_none() {
                let res = admm::atomic_norm_exact(&z.data, &opts)?;
                let taus = localization::localize_support(&res.dual, 1e-2, true)?;
                localization::amplitudes_ls(&z, &taus)?
            } else {
                let lambda = resolve_lambda(&z, lambda)?;
                let res = admm::denoise(&z, lambda, &opts)?;
                let dual = admm::extract_dual(&z.data, &res.x_hat, lambda)?;
                let taus = localization::localize_support(&dual, 1e-2, true)?;
                localization::amplitudes_ls(&z, &taus)?
            };
            write_output(&estimate, &out)?;
        }
        Command::Bench { config, out } => {
            let cfg = config.load()?;
            let result = harness::run_sweep(&cfg)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            result.write_records_csv(File::create(out.join("records.csv"))?)?;
            result.write_aggregates_csv(File::create(out.join("aggregates.csv"))?)?;
            result.write_json(File::create(out.join("sweep.json"))?)?;
            eprintln!(
                "wrote {} records, {} aggregate rows to {}",
                result.records.len(),
                result.aggregates.len(),
                out.display()
            );
        }
        Command::Dualpoly {
            config,
            method,
            out,
        } => {
            let cfg = config.load()?;
            let method = parse_method(&method)?;
            let table = harness::emit_dual_poly(&cfg, method)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            table.write_csv(File::create(out.join("dualpoly.csv"))?)?;
            table.write_json(File::create(out.join("dualpoly.json"))?)?;
            eprintln!("wrote dual polynomial samples to {}", out.display());
        }
    }
    Ok(())
}
