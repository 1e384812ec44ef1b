use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaeConfig {
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        Self { gamma: 0.5, lambda: 0.9 }
    }
}

impl GaeConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(AgentError::Config(format!("agent.gamma = {} must lie in (0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(AgentError::Config(format!("agent.lambda = {} must lie in [0, 1]", self.lambda)));
        }
        Ok(())
    }
}

/// `a_t = sum_l (gamma lambda)^l delta_{t+l}` with
/// `delta_t = r_t + gamma V_{t+1} - V_t`, where `rewards[t]` follows the action
/// at `t` and the value after the last step is zero.
pub fn compute_gae<T: Real>(rewards: &[T], values: &[T], config: &GaeConfig) -> Result<Vec<T>, AgentError> {
    if rewards.len() != values.len() {
        return Err(AgentError::Shape(format!("{} rewards but {} values", rewards.len(), values.len())));
    }
    let gamma = T::lit(config.gamma);
    let decay = gamma * T::lit(config.lambda);
    let mut adv = vec![T::zero(); rewards.len()];
    let mut running = T::zero();
    for t in (0..rewards.len()).rev() {
        let next = values.get(t + 1).copied().unwrap_or(T::zero());
        let delta = rewards[t] + gamma * next - values[t];
        running = delta + decay * running;
        adv[t] = running;
    }
    Ok(adv)
}

/// Critic regression targets `a_t + V_t`.
pub fn lambda_returns<T: Real>(advantages: &[T], values: &[T]) -> Vec<T> {
    advantages.iter().zip(values).map(|(a, v)| *a + *v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_advantage() {
        let r = [1.0, -2.0, 0.5];
        let v = [0.3, 0.1, -0.4];
        let cfg = GaeConfig { gamma: 0.9, lambda: 0.0 };
        let a = compute_gae(&r, &v, &cfg).unwrap();
        assert_eq!(a, vec![1.0 + 0.9 * 0.1 - 0.3, -2.0 + 0.9 * -0.4 - 0.1, 0.5 + 0.4]);
    }

    #[test]
    fn zeros_in_zeros_out() {
        let a = compute_gae(&[0.0; 5], &[0.0; 5], &GaeConfig::default()).unwrap();
        assert_eq!(a, vec![0.0; 5]);
    }

    #[test]
    fn missing_values_rejected() {
        assert!(compute_gae(&[1.0, 2.0], &[0.0], &GaeConfig::default()).is_err());
    }

    #[test]
    fn config_ranges() {
        assert!(GaeConfig { gamma: 0.0, lambda: 0.5 }.validate().is_err());
        assert!(GaeConfig { gamma: 1.0, lambda: 1.0 }.validate().is_ok());
        assert!(GaeConfig { gamma: 0.9, lambda: 1.1 }.validate().is_err());
    }
}
