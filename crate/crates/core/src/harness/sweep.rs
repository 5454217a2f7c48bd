use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::mix_seed;

use super::config::ExperimentConfig;
use super::run::{run_cell, AuditRow, SweepResult};

pub const SWEEP_HEADER: &str =
    "domain,algorithm,alpha0,seed,final_avg_reward,diverged,max_weight_norm,steps_completed,status";
pub const AUDIT_HEADER: &str =
    "step,beta,lam_plus,lam_minus,lam_im_plus,lam_im_minus,sq_norm_standard,sq_norm_implicit,ratio";

/// (α₀, seed) for every cell, α₀-major. Cell `i` gets seed `mix_seed(base_seed, i)`.
pub fn sweep_cells(config: &ExperimentConfig) -> Vec<(f64, u64)> {
    config
        .alpha0_grid
        .iter()
        .flat_map(|a| std::iter::repeat_n(*a, config.n_seeds))
        .enumerate()
        .map(|(i, a)| (a, mix_seed(config.base_seed, i as u64)))
        .collect()
}

/// Runs every cell of the grid on `parallelism` threads. Rows come back in
/// cell order whatever the completion order; a failing cell yields an
/// `error:` row instead of aborting the sweep.
pub fn run_sweep(config: &ExperimentConfig, parallelism: usize) -> Result<Vec<SweepResult>> {
    config.validate()?;
    let cells = sweep_cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(alpha0, seed)| {
                run_cell(config, alpha0, seed).unwrap_or_else(|e| SweepResult {
                    domain: config.domain,
                    algorithm: config.algorithm,
                    alpha0,
                    seed,
                    final_avg_reward: 0.0,
                    diverged: false,
                    max_weight_norm: 0.0,
                    steps_completed: 0,
                    status: format!("error: {e}").replace([',', '\n', '\r'], ";"),
                })
            })
            .collect()
    }))
}

pub fn sweep_csv(rows: &[SweepResult]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.domain,
            r.algorithm,
            r.alpha0,
            r.seed,
            r.final_avg_reward,
            r.diverged,
            r.max_weight_norm,
            r.steps_completed,
            r.status
        )
        .expect("writing to a String");
    }
    out
}

pub fn audit_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from(AUDIT_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.step,
            r.beta,
            r.lam_plus,
            r.lam_minus,
            r.lam_im_plus,
            r.lam_im_minus,
            r.sq_norm_standard,
            r.sq_norm_implicit,
            r.ratio()
        )
        .expect("writing to a String");
    }
    out
}
