//! Underwater acoustic channel impulse responses.
//!
//! Two sources of [`ChannelImpulseResponse`] exist: the image-method surrogate in
//! [`surrogate`], and BELLHOP ASCII arrival files read by [`arrivals`]. Both are
//! reduced to a sampled [`DiscreteChannel`] before entering the PHY.

pub mod arrivals;
mod cir;
mod discrete;
mod geometry;
pub mod surrogate;

pub use arrivals::{parse_bellhop_arrivals, Arrival, ArrivalError, ArrivalFile, ParseError, ParseErrorKind, SourceBlock};
pub use cir::{ChannelImpulseResponse, Endpoint, LinkId, Tap};
pub use discrete::{discretize, DiscreteChannel};
pub use geometry::{Geometry3D, Vec3};
pub use surrogate::{generate_cir, AcousticEnv};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel impulse response has no taps")]
    NoTaps,
    #[error("tap {index} has invalid delay {delay}")]
    InvalidDelay { index: usize, delay: f64 },
    #[error("taps are not sorted by delay at index {index}")]
    Unsorted { index: usize },
    #[error("channel energy must be finite and positive, got {energy}")]
    BadEnergy { energy: f64 },
    #[error("zero-distance link between {src:?} and {dst:?}")]
    ZeroDistance { src: Endpoint, dst: Endpoint },
    #[error("tap delay {delay} s exceeds the {max_len}-sample window at period {period} s")]
    DelayOverflow { delay: f64, max_len: usize, period: f64 },
    #[error("sampling period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("position {position:?} of {endpoint:?} lies outside the {bounds:?} box")]
    OutOfBounds { endpoint: Endpoint, position: Vec3, bounds: Vec3 },
    #[error("node {0} does not exist")]
    UnknownNode(usize),
    #[error("invalid acoustic environment: {0}")]
    InvalidEnv(String),
}
