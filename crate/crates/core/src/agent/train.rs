use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::checkpoint::{Checkpoint, CHECKPOINT_VERSION};
use super::net::{Inputs, NetShape};
use super::policy::{
    actor_forward, actor_objective, critic_forward, critic_loss, inputs_from, sample_action, ActorObjective, ActorOutput, ActorStep, Sample,
};
use super::{compute_gae, lambda_returns, Adam, AgentConfig, AgentError};
use crate::env::{oracle_best_reward, ActionMatrix, CrEnv, EnvConfig, RewardWeights, ThroughputTerm};
use crate::oracle::GroundTruth;
use crate::sensing::Observation;
use crate::{derive_seed, Real};

/// One stored step of a rollout.
#[derive(Debug, Clone)]
pub struct Transition<T> {
    pub inputs: Inputs<T>,
    pub rb: usize,
    pub raw_rates: Vec<T>,
    pub sigma: T,
    /// Reward that followed the action.
    pub reward: T,
    pub value: T,
    pub log_prob: T,
    pub truth: Option<GroundTruth<f64>>,
}

/// Per-episode aggregates; means are over steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeStats {
    pub steps: usize,
    pub skipped: usize,
    pub reward: f64,
    /// Mean realised throughput, failures counted as zero.
    pub throughput: f64,
    /// Successes over steps with a transmission opportunity.
    pub success_rate: f64,
    /// Mean of the per-state reward upper bound.
    pub oracle_reward: f64,
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub reward: f64,
    pub throughput: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateDiagnostics {
    pub actor_objective: f64,
    pub critic_loss: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    Plateau,
}

#[derive(Debug, Clone)]
pub struct TrainResult<T> {
    pub agent: Agent<T>,
    pub log: Vec<EpisodeLog>,
    pub diagnostics: Vec<UpdateDiagnostics>,
    pub stop: StopReason,
}

#[derive(Debug, Clone)]
pub struct Agent<T> {
    pub config: AgentConfig,
    pub actor_shape: NetShape,
    pub critic_shape: NetShape,
    pub actor: Vec<T>,
    pub critic: Vec<T>,
    actor_opt: Adam,
    critic_opt: Adam,
    pub rate_noise: f64,
    pub updates: u64,
    /// Weights of the reward terms the actor differentiates directly.
    pub reward: RewardWeights,
    /// Throughput term the actor differentiates directly.
    pub throughput: ThroughputTerm,
    /// Updates discarded because a gradient was not finite.
    pub rejected_updates: u64,
}

fn norm<T: Real>(g: &[T]) -> f64 {
    g.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>().sqrt()
}

fn clip<T: Real>(g: &mut [T], max_norm: f64) -> f64 {
    let n = norm(g);
    if max_norm > 0.0 && n > max_norm {
        let s = T::lit(max_norm / n);
        g.iter_mut().for_each(|v| *v *= s);
    }
    n
}

fn add_into<T: Real>(acc: &mut [T], part: &[T]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += *p;
    }
}

impl<T: Real> Agent<T> {
    pub fn new(config: AgentConfig, n_rb: usize, n_sens: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let actor_shape = config.actor_shape(n_rb, n_sens);
        let critic_shape = config.critic_shape(n_rb, n_sens);
        actor_shape.validate()?;
        critic_shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let actor = actor_shape.init(config.init_out_scale, &mut rng);
        let critic = critic_shape.init(config.init_out_scale, &mut rng);
        Ok(Self {
            actor_opt: Adam::new(actor.len(), config.actor_lr),
            critic_opt: Adam::new(critic.len(), config.critic_lr),
            rate_noise: config.rate_noise,
            updates: 0,
            reward: RewardWeights::default(),
            throughput: ThroughputTerm::default(),
            rejected_updates: 0,
            actor_shape,
            critic_shape,
            actor,
            critic,
            config,
        })
    }

    pub fn n_rb(&self) -> usize {
        self.actor_shape.n_rb
    }

    pub fn n_sens(&self) -> usize {
        self.actor_shape.n_sens
    }

    pub fn inputs(&self, obs: &Observation<f64>) -> Result<Inputs<T>, AgentError> {
        inputs_from(obs, self.n_rb(), self.n_sens())
    }

    pub fn actor_output(&self, obs: &Observation<f64>) -> Result<ActorOutput<T>, AgentError> {
        actor_forward(&self.actor_shape, &self.actor, &self.inputs(obs)?)
    }

    pub fn value(&self, obs: &Observation<f64>) -> Result<T, AgentError> {
        critic_forward(&self.critic_shape, &self.critic, &self.inputs(obs)?)
    }

    /// The deterministic action: both heads as they are.
    pub fn greedy_action(&self, obs: &Observation<f64>) -> Result<ActionMatrix, AgentError> {
        Ok(self.actor_output(obs)?.greedy_action())
    }

    pub fn n_params(&self) -> usize {
        self.actor.len() + self.critic.len()
    }

    /// One actor and one critic step from a batch of complete episodes.
    pub fn update(&mut self, episodes: &[Vec<Transition<T>>]) -> Result<UpdateDiagnostics, AgentError> {
        let gae = self.config.gae();
        let mut advantages = Vec::with_capacity(episodes.len());
        let mut returns = Vec::with_capacity(episodes.len());
        for ep in episodes {
            let r: Vec<T> = ep.iter().map(|t| t.reward).collect();
            let v: Vec<T> = ep.iter().map(|t| t.value).collect();
            let a = compute_gae(&r, &v, &gae)?;
            returns.push(lambda_returns(&a, &v));
            advantages.push(a);
        }
        let count: usize = episodes.iter().map(Vec::len).sum();
        if count == 0 {
            return Ok(UpdateDiagnostics::default());
        }
        if self.config.center_advantages {
            let mean = advantages.iter().flatten().copied().sum::<T>() / T::from_usize_lossy(count);
            advantages.iter_mut().flatten().for_each(|a| *a -= mean);
        }
        let scale = T::one() / T::from_usize_lossy(count);
        let obj = ActorObjective {
            entropy: self.config.entropy,
            aux: self.config.aux_weight,
            reward: self.reward,
            throughput: self.throughput,
            rate_gradient: self.config.rate_gradient,
        };

        let actor_parts = episodes
            .par_iter()
            .zip(advantages.par_iter())
            .map(|(ep, adv)| {
                let mut g = vec![T::zero(); self.actor.len()];
                let mut j = T::zero();
                for (t, a) in ep.iter().zip(adv) {
                    let step = ActorStep {
                        inputs: &t.inputs,
                        rb: t.rb,
                        raw_rates: &t.raw_rates,
                        sigma: t.sigma,
                        advantage: *a,
                        truth: t.truth.as_ref(),
                    };
                    j += actor_objective(&self.actor_shape, &self.actor, &step, &obj, scale, &mut g)?;
                }
                Ok((g, j))
            })
            .collect::<Result<Vec<_>, AgentError>>()?;
        let critic_parts = episodes
            .par_iter()
            .zip(returns.par_iter())
            .map(|(ep, ret)| {
                let mut g = vec![T::zero(); self.critic.len()];
                let mut l = T::zero();
                for (t, target) in ep.iter().zip(ret) {
                    l += critic_loss(&self.critic_shape, &self.critic, &t.inputs, *target, scale, &mut g)?;
                }
                Ok((g, l))
            })
            .collect::<Result<Vec<_>, AgentError>>()?;

        let mut g_actor = vec![T::zero(); self.actor.len()];
        let mut objective = T::zero();
        for (g, j) in &actor_parts {
            add_into(&mut g_actor, g);
            objective += *j;
        }
        // ascend the objective: descend its negative
        g_actor.iter_mut().for_each(|v| *v = -*v);
        let mut g_critic = vec![T::zero(); self.critic.len()];
        let mut loss = T::zero();
        for (g, l) in &critic_parts {
            add_into(&mut g_critic, g);
            loss += *l;
        }

        let mut diag = UpdateDiagnostics {
            actor_objective: objective.to_f64_lossy() / count as f64,
            critic_loss: loss.to_f64_lossy() / count as f64,
            actor_grad_norm: clip(&mut g_actor, self.config.max_grad_norm),
            critic_grad_norm: clip(&mut g_critic, self.config.max_grad_norm),
            rejected: false,
        };
        if !(diag.actor_grad_norm.is_finite() && diag.critic_grad_norm.is_finite()) {
            diag.rejected = true;
            self.rejected_updates += 1;
            return Ok(diag);
        }
        self.actor_opt.step(&mut self.actor, &g_actor);
        self.critic_opt.step(&mut self.critic, &g_critic);
        self.updates += 1;
        self.rate_noise = (self.rate_noise * self.config.rate_noise_decay).max(self.config.rate_noise_min);
        Ok(diag)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            actor_shape: self.actor_shape.clone(),
            critic_shape: self.critic_shape.clone(),
            actor: self.actor.iter().map(|v| v.to_f64_lossy()).collect(),
            critic: self.critic.iter().map(|v| v.to_f64_lossy()).collect(),
            rate_noise: self.rate_noise,
            updates: self.updates,
        }
    }

    /// Restores parameters; optimiser moments start fresh.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, AgentError> {
        let mut agent = Self::new(ck.config.clone(), ck.actor_shape.n_rb, ck.actor_shape.n_sens)?;
        if agent.actor_shape != ck.actor_shape || agent.critic_shape != ck.critic_shape {
            return Err(AgentError::Checkpoint("stored shapes disagree with the stored configuration".into()));
        }
        agent.actor = ck.actor.iter().map(|v| T::lit(*v)).collect();
        agent.critic = ck.critic.iter().map(|v| T::lit(*v)).collect();
        agent.rate_noise = ck.rate_noise;
        agent.updates = ck.updates;
        Ok(agent)
    }
}

/// Plays one episode. With `explore` the RB is sampled and the rate perturbed;
/// otherwise the greedy action goes through the environment's arg-max decision.
pub fn rollout<T: Real>(
    agent: &Agent<T>,
    env: &mut CrEnv,
    seed: u64,
    explore: bool,
) -> Result<(Vec<Transition<T>>, EpisodeStats), AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let weights = env.config().reward;
    let mut obs = env.reset(seed)?;
    let sigma = T::lit(if explore { agent.rate_noise } else { 0.0 });
    let mut transitions = Vec::new();
    let mut stats = EpisodeStats::default();
    let mut successes = 0usize;
    loop {
        let inputs = agent.inputs(&obs)?;
        let out = actor_forward(&agent.actor_shape, &agent.actor, &inputs)?;
        let value = critic_forward(&agent.critic_shape, &agent.critic, &inputs)?;
        let sample: Sample<T> = sample_action(&out, sigma, explore, &mut rng);
        stats.oracle_reward += oracle_best_reward(env.truth()?, &weights);
        let outcome = if explore { env.step_on(&sample.action(&out), sample.rb)? } else { env.step(&out.greedy_action())? };
        stats.steps += 1;
        stats.reward += outcome.reward;
        stats.throughput += outcome.throughput;
        if outcome.skipped {
            stats.skipped += 1;
        }
        if outcome.success {
            successes += 1;
        }
        transitions.push(Transition {
            inputs,
            rb: sample.rb,
            raw_rates: sample.raw_rates,
            sigma,
            reward: T::lit(outcome.reward),
            value,
            log_prob: sample.log_prob,
            truth: (!outcome.skipped).then_some(outcome.truth),
        });
        obs = outcome.observation;
        if outcome.done {
            break;
        }
    }
    let n = stats.steps as f64;
    stats.reward /= n;
    stats.throughput /= n;
    stats.oracle_reward /= n;
    let opportunities = stats.steps - stats.skipped;
    stats.success_rate = if opportunities > 0 { successes as f64 / opportunities as f64 } else { 0.0 };
    Ok((transitions, stats))
}

/// Greedy evaluation, one episode per seed, in parallel; results follow `seeds`.
pub fn evaluate<T: Real>(agent: &Agent<T>, env_config: &EnvConfig, seeds: &[u64]) -> Result<Vec<EpisodeStats>, AgentError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut env = CrEnv::new(env_config.clone())?;
            Ok(rollout(agent, &mut env, seed, false)?.1)
        })
        .collect()
}

fn plateaued(log: &[EpisodeLog], window: usize, tolerance: f64) -> bool {
    if window == 0 || log.len() < 2 * window {
        return false;
    }
    let mean = |s: &[EpisodeLog]| s.iter().map(|e| e.reward).sum::<f64>() / s.len() as f64;
    let recent = mean(&log[log.len() - window..]);
    let before = mean(&log[log.len() - 2 * window..log.len() - window]);
    (recent - before).abs() <= tolerance * before.abs().max(1e-12)
}

/// Episodes of exploration, each batch followed by one update, until the budget
/// is spent or the reward plateaus. Bit-identical for identical inputs.
pub fn train<T: Real>(env_config: &EnvConfig, config: &AgentConfig) -> Result<TrainResult<T>, AgentError> {
    train_with(env_config, config, |_, _| {})
}

/// [`train`] with a callback after every update.
pub fn train_with<T: Real, F: FnMut(&[EpisodeLog], &UpdateDiagnostics)>(
    env_config: &EnvConfig,
    config: &AgentConfig,
    mut progress: F,
) -> Result<TrainResult<T>, AgentError> {
    let probe = CrEnv::new(env_config.clone())?;
    let mut agent = Agent::new(config.clone(), probe.n_rb(), probe.n_sens())?;
    agent.reward = env_config.reward;
    agent.throughput = env_config.scenario.throughput;
    let mut log = Vec::new();
    let mut diagnostics = Vec::new();
    let mut stop = StopReason::Budget;
    while log.len() < config.episodes {
        let start = log.len();
        let batch = config.episodes_per_update.min(config.episodes - start);
        let results = (0..batch)
            .into_par_iter()
            .map(|b| {
                let mut env = CrEnv::new(env_config.clone())?;
                rollout(&agent, &mut env, derive_seed(config.seed, (start + b) as u64), true)
            })
            .collect::<Result<Vec<_>, AgentError>>()?;
        let mut episodes = Vec::with_capacity(batch);
        for (b, (transitions, stats)) in results.into_iter().enumerate() {
            log.push(EpisodeLog {
                episode: start + b,
                reward: stats.reward,
                throughput: stats.throughput,
                success_rate: stats.success_rate,
            });
            episodes.push(transitions);
        }
        let diag = agent.update(&episodes)?;
        progress(&log, &diag);
        diagnostics.push(diag);
        if plateaued(&log, config.plateau_window, config.plateau_tolerance) {
            stop = StopReason::Plateau;
            break;
        }
    }
    Ok(TrainResult { agent, log, diagnostics, stop })
}
