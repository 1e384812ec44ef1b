//! Exact link-quality oracles: equalisation, per-subcarrier SINR with the
//! interference expectation in closed form, packet rate, CQI and the ground truth
//! the environment judges decisions against.
//!
//! `F H_s^{-1} J` and `D^{-1} F J` are the same quantity; it is computed once as
//! the DFT of the interference divided by the victim's channel eigenvalue.

mod cqi;
mod equalize;
mod montecarlo;
mod sinr;
mod truth;

pub use cqi::{compute_cqi, BeaconSpec};
pub use equalize::{equalize, equalize_components, EqualizedComponents};
pub use montecarlo::{montecarlo_sinr, MonteCarloSinr};
pub use sinr::{interference_psd, packet_rate, sinr_report, subcarrier_sinr, total_interference_psd, SinrReport};
pub use truth::{ground_truth, occupied_rbs, GroundTruth};

use thiserror::Error;

use crate::phy::PhyError;

/// Smallest `|D[k]|` accepted on a bin of interest.
pub const DEFAULT_SINGULAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("channel eigenvalue on bin {bin} has magnitude {magnitude:e}, below the floor")]
    Singular { bin: usize, magnitude: f64 },
    #[error("empty subcarrier allocation")]
    EmptyAllocation,
    #[error("no SINR entries to average")]
    EmptyReport,
    #[error("beacon has no pilot on RB {rb}")]
    BeaconCoverage { rb: usize },
    #[error("pilot missing on bin {bin}")]
    MissingPilot { bin: usize },
    #[error(transparent)]
    Phy(#[from] PhyError),
}
