//! `itd`: run TD(λ)/SARSA(λ) sweeps, stability audits and fixed-point checks.
//!
//! Exit codes: 0 success, 2 configuration error, 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use implicit_td::envs::FiniteMrp;
use implicit_td::harness::{
    audit_csv, fixed_point_check, fixed_point_check_mrp, run_cell, run_sweep, stability_audit_run, sweep_csv,
    ExperimentConfig,
};
use implicit_td::{DiscountSpec, Error};

/// Default output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "ITD_OUT_DIR";

#[derive(Parser)]
#[command(name = "itd", version, about = "Standard vs implicit TD(lambda) experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config override `key=value`; may repeat. Overrides win over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the alpha0 x seed grid and write sweep.csv.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Base seed for per-cell seed derivation.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Run one cell with per-step stability audits and write audit.csv.
    Audit {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Step-size; defaults to the largest grid value.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Audit every n-th transition; defaults to the config's audit_every.
        #[arg(long)]
        every: Option<usize>,
    },
    /// Run a single cell and print its CSV row.
    Cell {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Compare both learners with the TD fixed point of a finite MRP.
    FixedPoint {
        #[arg(long, default_value_t = 5)]
        states: usize,
        /// Use the deterministic two-state cycle with rewards (1, 0) instead of a random chain.
        #[arg(long)]
        cycle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::from_file(path)?;
    config.apply_overrides(common.overrides.iter().map(String::as_str))?;
    Ok(config)
}

fn out_path(explicit: Option<&PathBuf>, default_name: &str) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")).join(default_name)
    })
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Sweep { config, common, seed, parallelism } => {
            let mut config = load(&config, &common)?;
            if let Some(seed) = seed {
                config.base_seed = seed;
            }
            let rows = run_sweep(&config, parallelism)?;
            let path = out_path(common.out.as_ref(), "sweep.csv");
            write(&path, &sweep_csv(&rows))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Audit { config, common, alpha, seed, every } => {
            let config = load(&config, &common)?;
            let alpha = match alpha.or_else(|| config.alpha0_grid.iter().copied().reduce(f64::max)) {
                Some(a) => a,
                None => return Err(Error::Config("no --alpha given and alpha0_grid is empty".into())),
            };
            let (result, rows) = stability_audit_run(&config, alpha, seed, every.unwrap_or(config.audit_every))?;
            let path = out_path(common.out.as_ref(), "audit.csv");
            write(&path, &audit_csv(&rows))?;
            eprintln!(
                "wrote {} audit rows to {} (diverged={}, steps={})",
                rows.len(),
                path.display(),
                result.diverged,
                result.steps_completed
            );
        }
        Command::Cell { config, common, alpha, seed } => {
            let config = load(&config, &common)?;
            let row = run_cell(&config, alpha, seed)?;
            let csv = sweep_csv(std::slice::from_ref(&row));
            match common.out {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::FixedPoint { states, cycle, seed, gamma, lambda, steps, out } => {
            let disc = DiscountSpec::new(gamma, lambda).map_err(|e| Error::Config(e.to_string()))?;
            let report = if cycle {
                fixed_point_check_mrp(&FiniteMrp::two_state_cycle([1.0, 0.0]), disc, steps, seed)?
            } else {
                fixed_point_check(states, seed, disc, steps).map_err(|e| match e {
                    Error::InvalidParameter { .. } => Error::Config(e.to_string()),
                    other => other,
                })?
            };
            let fmt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            let text = format!(
                "w_star={}\nw_standard={}\nw_implicit={}\nerr_standard={}\nerr_implicit={}\n",
                fmt(&report.w_star),
                fmt(&report.w_standard),
                fmt(&report.w_implicit),
                report.err_standard,
                report.err_implicit
            );
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
