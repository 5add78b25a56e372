//! Command-line front end: every subcommand resolves to an experiment
//! config, runs it, persists the output directory and exits with the
//! pass/fail status of the report.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use roughpde::harness::{
    read_report, run_to_dir, verify_rerun, ExperimentConfig, ExperimentKind, Params, RunReport,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "roughpde", version, about = "Rough-path solvers and experiments for Burgers-type SPDEs")]
struct Cli {
    /// Worker threads for ensembles and sweeps (results do not depend on it).
    #[arg(long, global = true, env = "ROUGHPDE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Omitted keys take their defaults.
    #[arg(long, env = "ROUGHPDE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "ROUGHPDE_SEED")]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`, then `runs/<kind>-<seed>`.
    #[arg(long, env = "ROUGHPDE_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the Gaussian field and export its lifts (or check its covariance).
    Field {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = FieldKind::Sample)]
        kind: FieldKind,
        /// Number of Fourier modes N.
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Snapshot times, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        times: Option<Vec<f64>>,
        /// Field components n.
        #[arg(long)]
        dim: Option<usize>,
        /// Grid cells M.
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Solve one problem with the rough fixed point (or run the area-shift experiment).
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Convergence sweeps under mollification or hyperviscosity.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ConvergeKind::Mollifier)]
        kind: ConvergeKind,
    },
    /// Forward, backward and centered stencils against the rough solution.
    StencilCompare {
        #[command(flatten)]
        common: Common,
    },
    /// Invariant-measure sampling and the reversibility test.
    Invariant {
        #[command(flatten)]
        common: Common,
    },
    /// Exponential-moment probe of the potential term.
    ExpMoment {
        #[command(flatten)]
        common: Common,
    },
    /// Summarise a finished run, optionally re-running it to check reproducibility.
    Report {
        dir: PathBuf,
        /// Re-run from the persisted config and compare every output file.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldKind {
    Sample,
    Covariance,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvergeKind {
    Mollifier,
    Hyperviscosity,
}

fn load_config(common: &Common, default: ExperimentKind, allowed: &[ExperimentKind]) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let config = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
            if !allowed.contains(&config.kind) {
                let names: Vec<&str> = allowed.iter().map(|k| k.name()).collect();
                bail!(
                    "{} has kind `{}`; this subcommand runs {}",
                    path.display(),
                    config.kind.name(),
                    names.join(" or ")
                );
            }
            config
        }
        None => ExperimentConfig::default_for(default),
    };
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    Ok(config)
}

fn output_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", config.kind.name(), config.seed)))
}

fn execute(common: &Common, config: ExperimentConfig) -> Result<bool> {
    config.validate()?;
    let dir = output_dir(common, &config);
    let report = run_to_dir(&config, &dir).with_context(|| format!("running {}", config.kind.name()))?;
    print_report(&report, &dir);
    Ok(report.passed)
}

fn print_report(report: &RunReport, dir: &Path) {
    print!("{}", report.summary());
    println!("output: {}", dir.display());
}

fn scratch_dir() -> PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or_default();
    std::env::temp_dir().join(format!("roughpde-verify-{}-{nanos}", std::process::id()))
}

fn report(dir: &Path, verify: bool) -> Result<bool> {
    let report = read_report(dir).with_context(|| format!("reading report in {}", dir.display()))?;
    print_report(&report, dir);
    if !verify {
        return Ok(report.passed);
    }
    let scratch = scratch_dir();
    let differing = verify_rerun(dir, &scratch);
    let _ = std::fs::remove_dir_all(&scratch);
    let differing = differing.context("re-running from the persisted config")?;
    if differing.is_empty() {
        println!("rerun: identical");
        Ok(report.passed)
    } else {
        println!("rerun: differs in {}", differing.join(", "));
        Ok(false)
    }
}

fn dispatch(command: Command) -> Result<bool> {
    use ExperimentKind as K;
    match command {
        Command::Field {
            common,
            kind,
            modes,
            sigma,
            times,
            dim,
            cells,
        } => {
            let default = match kind {
                FieldKind::Sample => K::Field,
                FieldKind::Covariance => K::LinearCovariance,
            };
            let mut config = load_config(&common, default, &[K::Field, K::LinearCovariance])?;
            match &mut config.params {
                Params::Field(p) => {
                    if let Some(n) = modes {
                        p.modes = n;
                        if cells.is_none() {
                            p.cells = p.cells.max((2 * n + 2).next_power_of_two());
                        }
                    }
                    if let Some(s) = sigma {
                        p.sigma = s;
                    }
                    if let Some(t) = times {
                        p.times = t;
                    }
                    if let Some(d) = dim {
                        p.dim = d;
                    }
                    if let Some(m) = cells {
                        p.cells = m;
                    }
                }
                _ if modes.is_some() || sigma.is_some() || times.is_some() || dim.is_some() || cells.is_some() => {
                    bail!("--modes, --sigma, --times, --dim and --cells apply to field sampling only")
                }
                _ => {}
            }
            execute(&common, config)
        }
        Command::Solve { common } => {
            let config = load_config(&common, K::Solve, &[K::Solve, K::AreaShift])?;
            execute(&common, config)
        }
        Command::Converge { common, kind } => {
            let default = match kind {
                ConvergeKind::Mollifier => K::MollifierConvergence,
                ConvergeKind::Hyperviscosity => K::HyperviscosityConvergence,
            };
            let config = load_config(
                &common,
                default,
                &[K::MollifierConvergence, K::HyperviscosityConvergence],
            )?;
            execute(&common, config)
        }
        Command::StencilCompare { common } => {
            let config = load_config(&common, K::StencilCompare, &[K::StencilCompare])?;
            execute(&common, config)
        }
        Command::Invariant { common } => {
            let config = load_config(&common, K::InvariantReversibility, &[K::InvariantReversibility])?;
            execute(&common, config)
        }
        Command::ExpMoment { common } => {
            let config = load_config(&common, K::ExpMoment, &[K::ExpMoment])?;
            execute(&common, config)
        }
        Command::Report { dir, verify } => report(&dir, verify),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
