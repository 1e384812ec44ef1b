//! Experiment harness for the `uwacr` simulator: versioned configuration, SNR
//! sweeps with confidence intervals, training curves and the `uwacr` CLI.

pub mod cli;
pub mod config;
pub mod curves;
pub mod sinr_check;
pub mod stats;
pub mod sweep;

pub use config::{BenchConfig, ConfigError, PolicyId};
pub use stats::{mean_ci, paired_ci, Estimate};
pub use sweep::{run_sweep, MetricsRow, SweepResult};
