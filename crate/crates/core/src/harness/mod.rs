//! Seeded experiment runs over (P, T, K, gamma) grids and their outputs.
//!
//! Every trial derives its own stream from `(root_seed, experiment, cell,
//! trial)` and results are reduced in (cell, trial) order, so tables are
//! identical for any worker count.

pub mod calibration;
pub mod config;
pub mod output;
pub mod run;

pub use calibration::{preset, run_calibration, CalibrationRow, CalibrationScenario};
pub use config::{ExperimentConfig, GridPoint, MarginalScheme, SweepLayout};
pub use output::{write_calibration_csv, write_convergence_csv, write_manifest, write_sweep_csvs, RunManifest};
pub use run::{run_convergence, run_sweep, Comparison, ConvergenceTable, Metric, SweepTable, TrialResult};
