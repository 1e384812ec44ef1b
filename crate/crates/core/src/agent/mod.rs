//! Advantage actor-critic with generalised advantage estimation.
//!
//! Actor and critic share a module layout (see [`net`]) but not parameters. The
//! actor objective is the score-function term weighted by the advantage, an
//! optional entropy bonus, and the differentiable reward terms evaluated directly
//! on the heads (by default averaged over the rate exploration noise); the
//! critic regresses the lambda-returns.

mod adam;
mod checkpoint;
mod gae;
pub mod net;
mod policy;
pub mod smooth;
mod train;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gae::{compute_gae, lambda_returns, GaeConfig};
pub use net::{Activation, Inputs, NetShape};
pub use policy::{
    actor_forward, actor_objective, argmax, critic_forward, critic_loss, inputs_from, log_prob, sample_action, ActorObjective, ActorOutput,
    ActorStep, RateGradient, Sample,
};
pub use train::{
    evaluate, rollout, train, train_with, Agent, EpisodeLog, EpisodeStats, StopReason, TrainResult, Transition, UpdateDiagnostics,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub conv_channels: usize,
    pub kernel: usize,
    pub pool: usize,
    pub conv_activation: Activation,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy: f64,
    /// Weight of the reward terms differentiated through the heads.
    pub aux_weight: f64,
    pub rate_gradient: RateGradient,
    /// Initial standard deviation of the rate exploration noise.
    pub rate_noise: f64,
    /// Multiplied into the noise scale after every update.
    pub rate_noise_decay: f64,
    pub rate_noise_min: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub max_grad_norm: f64,
    pub center_advantages: bool,
    /// Training budget in episodes (`T_max`).
    pub episodes: usize,
    pub episodes_per_update: usize,
    /// Stop early when the mean reward over the last `plateau_window` episodes
    /// moves by less than `plateau_tolerance` (relative) from the window before;
    /// 0 disables the check.
    pub plateau_window: usize,
    pub plateau_tolerance: f64,
    /// Scale of the initial output-layer weights.
    pub init_out_scale: f64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            conv_channels: 8,
            kernel: 5,
            pool: 8,
            conv_activation: Activation::Relu,
            hidden: vec![64, 64],
            gamma: 0.5,
            lambda: 0.9,
            actor_lr: 1e-3,
            critic_lr: 3e-3,
            entropy: 1e-3,
            aux_weight: 1.0,
            rate_gradient: RateGradient::Analytic,
            rate_noise: 0.3,
            rate_noise_decay: 0.995,
            rate_noise_min: 0.02,
            max_grad_norm: 10.0,
            center_advantages: true,
            episodes: 2000,
            episodes_per_update: 8,
            plateau_window: 0,
            plateau_tolerance: 0.01,
            init_out_scale: 0.1,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn gae(&self) -> GaeConfig {
        GaeConfig { gamma: self.gamma, lambda: self.lambda }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        self.gae().validate()?;
        let bad = |m: String| Err(AgentError::Config(m));
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("agent.{name} must be positive"));
            }
        }
        if self.critic_lr < self.actor_lr {
            return bad("agent.critic_lr must not be below agent.actor_lr".into());
        }
        for (name, v) in [
            ("entropy", self.entropy),
            ("aux_weight", self.aux_weight),
            ("rate_noise", self.rate_noise),
            ("rate_noise_min", self.rate_noise_min),
            ("max_grad_norm", self.max_grad_norm),
            ("plateau_tolerance", self.plateau_tolerance),
            ("init_out_scale", self.init_out_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("agent.{name} must be finite and nonnegative"));
            }
        }
        if !(self.rate_noise_decay > 0.0 && self.rate_noise_decay <= 1.0) {
            return bad("agent.rate_noise_decay must lie in (0, 1]".into());
        }
        if self.episodes_per_update == 0 {
            return bad("agent.episodes_per_update must be positive".into());
        }
        Ok(())
    }

    fn shape(&self, n_rb: usize, n_sens: usize, n_out: usize) -> NetShape {
        NetShape {
            n_rb,
            n_sens,
            conv_channels: self.conv_channels,
            kernel: self.kernel,
            pool: self.pool,
            conv_activation: self.conv_activation,
            hidden: self.hidden.clone(),
            n_out,
        }
    }

    pub fn actor_shape(&self, n_rb: usize, n_sens: usize) -> NetShape {
        self.shape(n_rb, n_sens, 2 * n_rb)
    }

    pub fn critic_shape(&self, n_rb: usize, n_sens: usize) -> NetShape {
        self.shape(n_rb, n_sens, 1)
    }
}
