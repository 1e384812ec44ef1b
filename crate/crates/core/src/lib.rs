//! Simulation laboratory for joint spectrum sensing and resource allocation in
//! asynchronous OFDMA underwater acoustic cognitive-radio networks.
//!
//! The numeric core (`chanmodel`, `phy`, `oracle`, `sensing`, `agent`) is generic
//! over [`Real`] (`f32` or `f64`); the aliases below fix it to `f64`, which is what
//! the environment, baselines and benchmark harness run on.

// `!(x >= y)` rejects NaN on purpose; indexed loops walk several parallel vectors.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod baselines;
pub mod chanmodel;
pub mod env;
pub mod oracle;
pub mod phy;
mod scalar;
mod seed;
pub mod sensing;

pub use scalar::Real;
pub use seed::derive_seed;

pub type Cir = chanmodel::ChannelImpulseResponse<f64>;
pub type Channel = chanmodel::DiscreteChannel<f64>;
pub type Phy = phy::OfdmPhy<f64>;
pub type Agent = agent::Agent<f64>;
