//! Experiment harness: configuration, seeded sweeps, stability audits and
//! fixed-point checks, with CSV output.

mod config;
mod fixed_point;
mod run;
mod sweep;

pub use config::{default_alpha_grid, Algorithm, Domain, ExperimentConfig};
pub use fixed_point::{fixed_point_check, fixed_point_check_mrp, sampled_fixed_point, FixedPointReport};
pub use run::{run_cell, stability_audit_run, AuditRow, SweepResult};
pub use sweep::{audit_csv, run_sweep, sweep_cells, sweep_csv, AUDIT_HEADER, SWEEP_HEADER};
