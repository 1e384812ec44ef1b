use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentConfig, AgentError, NetShape};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON snapshot of a trained agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config: AgentConfig,
    pub actor_shape: NetShape,
    pub critic_shape: NetShape,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub rate_noise: f64,
    pub updates: u64,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let ck: Self = serde_json::from_str(text).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        ck.check()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        fs::write(path, self.to_json()).map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = fs::read_to_string(path).map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<(), AgentError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!("version {} not supported (expected {CHECKPOINT_VERSION})", self.version)));
        }
        self.actor_shape.validate()?;
        self.critic_shape.validate()?;
        if self.actor.len() != self.actor_shape.n_params() || self.critic.len() != self.critic_shape.n_params() {
            return Err(AgentError::Checkpoint("parameter count does not match the stored shape".into()));
        }
        if self.actor.iter().chain(&self.critic).any(|v| !v.is_finite()) {
            return Err(AgentError::Checkpoint("non-finite parameter".into()));
        }
        Ok(())
    }
}
