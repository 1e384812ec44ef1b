//! SNR sweeps: every policy plays the same seeded episodes at every grid point,
//! so policy differences can be compared pairwise.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;
use uwacr::agent::{rollout, AgentError, EpisodeStats};
use uwacr::baselines::{
    calibrate_epsilon, decide_in, oracle_decide, random_decide, shannon_rate, BaselineError, Calibration, EpsilonPolicyConfig,
};
use uwacr::env::{oracle_action, oracle_best_reward, ActionMatrix, CrEnv, EnvConfig, EnvError};
use uwacr::{derive_seed, Agent};

use crate::config::{BenchConfig, PolicyId};
use crate::stats::{mean_ci, paired_ci, Estimate};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("the sweep includes the agent but no checkpoint was given")]
    MissingAgent,
    #[error("calibrating {policy} at {snr_db} dB: {source}")]
    Calibration { policy: String, snr_db: f64, source: BaselineError },
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Per-episode outcome of any policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeResult {
    /// Mean realised throughput in bits/s/Hz, failures counted as zero.
    pub se: f64,
    pub successes: usize,
    pub opportunities: usize,
    pub reward: f64,
    pub oracle_reward: f64,
}

impl EpisodeResult {
    pub fn success_rate(&self) -> Option<f64> {
        (self.opportunities > 0).then(|| self.successes as f64 / self.opportunities as f64)
    }

    fn from_stats(s: &EpisodeStats) -> Self {
        let opportunities = s.steps - s.skipped;
        Self {
            se: s.throughput,
            successes: (s.success_rate * opportunities as f64).round() as usize,
            opportunities,
            reward: s.reward,
            oracle_reward: s.oracle_reward,
        }
    }
}

/// A policy ready to act: baselines carry their back-off.
#[derive(Debug, Clone, Copy)]
pub enum Runner<'a> {
    Agent(&'a Agent),
    Epsilon(EpsilonPolicyConfig),
    Oracle,
    Random,
}

/// Plays one greedy episode from `seed`.
pub fn run_episode(env: &mut CrEnv, runner: &Runner<'_>, seed: u64) -> Result<EpisodeResult, SweepError> {
    if let Runner::Agent(agent) = runner {
        return Ok(EpisodeResult::from_stats(&rollout(agent, env, seed, false)?.1));
    }
    env.reset(seed)?;
    let n = env.n_rb();
    let weights = env.config().reward;
    let mut res = EpisodeResult::default();
    let mut steps = 0usize;
    let mut t = 0u64;
    while !env.is_done() {
        let decision_seed = derive_seed(seed ^ 0xdec1_5105, t);
        t += 1;
        let truth = env.truth()?.clone();
        let (action, rb) = match runner {
            Runner::Epsilon(cfg) => {
                let d = decide_in(env, cfg, decision_seed)?;
                (d.action(n), d.rb)
            }
            Runner::Oracle => match oracle_decide(&truth) {
                Some(d) => (oracle_action(&truth, &weights), d.rb),
                None => (ActionMatrix::one_hot(n, 0, 0.0), 0),
            },
            Runner::Random => {
                let top = env.observation()?.cqi.iter().copied().fold(0.0, f64::max);
                let d = random_decide(n, shannon_rate(top), decision_seed);
                (d.action(n), d.rb)
            }
            Runner::Agent(_) => unreachable!(),
        };
        let o = env.step_on(&action, rb)?;
        steps += 1;
        res.se += o.throughput;
        res.reward += o.reward;
        res.oracle_reward += oracle_best_reward(&truth, &weights);
        if !o.skipped {
            res.opportunities += 1;
            res.successes += usize::from(o.success);
        }
    }
    if steps > 0 {
        res.se /= steps as f64;
        res.reward /= steps as f64;
        res.oracle_reward /= steps as f64;
    }
    Ok(res)
}

/// Evaluation seeds shared by every policy and SNR point.
pub fn episode_seeds(root: u64, episodes: usize) -> Vec<u64> {
    (0..episodes as u64).map(|i| derive_seed(root, i)).collect()
}

/// Runs `runner` on every seed, in parallel; results follow `seeds`.
pub fn run_episodes(env_config: &EnvConfig, runner: &Runner<'_>, seeds: &[u64]) -> Result<Vec<EpisodeResult>, SweepError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut env = CrEnv::new(env_config.clone())?;
            run_episode(&mut env, runner, seed)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub policy: String,
    pub snr_db: f64,
    pub episodes: usize,
    /// Back-off used by an epsilon policy.
    pub epsilon: Option<f64>,
    pub se: Estimate,
    /// Mean per-episode success rate over episodes with at least one opportunity.
    pub success: Estimate,
}

/// Agent SE minus a baseline's SE on the same episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRow {
    pub policy: String,
    pub baseline: String,
    pub snr_db: f64,
    pub se_diff: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub policy: String,
    pub snr_db: f64,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<MetricsRow>,
    pub paired: Vec<PairedRow>,
    pub calibrations: Vec<CalibrationRow>,
}

pub fn summarize(policy: &str, snr_db: f64, epsilon: Option<f64>, results: &[EpisodeResult]) -> MetricsRow {
    let se: Vec<f64> = results.iter().map(|r| r.se).collect();
    let success: Vec<f64> = results.iter().filter_map(EpisodeResult::success_rate).collect();
    MetricsRow { policy: policy.to_string(), snr_db, episodes: results.len(), epsilon, se: mean_ci(&se), success: mean_ci(&success) }
}

/// The epsilon-policy configuration for `policy`, or `None` for the others.
pub fn epsilon_policy(policy: PolicyId) -> Option<EpsilonPolicyConfig> {
    match policy {
        PolicyId::CqiEps { k } => Some(EpsilonPolicyConfig::cqi(0.0, k)),
        PolicyId::EdEps => Some(EpsilonPolicyConfig::ed(0.0)),
        _ => None,
    }
}

fn config_at(cfg: &BenchConfig, snr_db: f64) -> EnvConfig {
    let mut env = cfg.env();
    env.scenario.snr_db = snr_db;
    env
}

/// Fixed back-off from the config, or calibrated on `env` when absent.
pub fn resolve_epsilon(cfg: &BenchConfig, env: &EnvConfig, policy: PolicyId) -> Result<Option<(f64, Option<Calibration>)>, SweepError> {
    let Some(base) = epsilon_policy(policy) else {
        return Ok(None);
    };
    let fixed = match policy {
        PolicyId::EdEps => cfg.bench.ed_epsilon,
        _ => cfg.bench.cqi_epsilon,
    };
    if let Some(e) = fixed {
        return Ok(Some((e, None)));
    }
    let cal = calibrate_epsilon(env, &base, &cfg.bench.calibration).map_err(|source| SweepError::Calibration {
        policy: policy.label(),
        snr_db: env.scenario.snr_db,
        source,
    })?;
    Ok(Some((cal.epsilon, Some(cal))))
}

/// Evaluates every configured policy at every SNR point. With zero episodes the
/// result is empty and nothing is calibrated.
pub fn run_sweep(cfg: &BenchConfig, agent: Option<&Agent>) -> Result<SweepResult, SweepError> {
    let mut out = SweepResult::default();
    if cfg.bench.episodes == 0 {
        return Ok(out);
    }
    if cfg.bench.policies.contains(&PolicyId::Agent) && agent.is_none() {
        return Err(SweepError::MissingAgent);
    }
    let seeds = episode_seeds(cfg.bench.seed, cfg.bench.episodes);
    for &snr in &cfg.bench.snr_db {
        let env = config_at(cfg, snr);
        let mut per_policy: Vec<(PolicyId, Vec<EpisodeResult>)> = Vec::new();
        for &policy in &cfg.bench.policies {
            let (runner, epsilon) = match policy {
                PolicyId::Agent => (Runner::Agent(agent.expect("checked above")), None),
                PolicyId::Oracle => (Runner::Oracle, None),
                PolicyId::Random => (Runner::Random, None),
                PolicyId::CqiEps { .. } | PolicyId::EdEps => {
                    let (eps, cal) = resolve_epsilon(cfg, &env, policy)?.expect("epsilon policy");
                    if let Some(calibration) = cal {
                        out.calibrations.push(CalibrationRow { policy: policy.label(), snr_db: snr, calibration });
                    }
                    (Runner::Epsilon(epsilon_policy(policy).expect("epsilon policy").with_epsilon(eps)), Some(eps))
                }
            };
            let results = run_episodes(&env, &runner, &seeds)?;
            out.rows.push(summarize(&policy.label(), snr, epsilon, &results));
            per_policy.push((policy, results));
        }
        if let Some((_, agent_res)) = per_policy.iter().find(|(p, _)| *p == PolicyId::Agent) {
            let a: Vec<f64> = agent_res.iter().map(|r| r.se).collect();
            for (p, res) in per_policy.iter().filter(|(p, _)| *p != PolicyId::Agent) {
                let b: Vec<f64> = res.iter().map(|r| r.se).collect();
                out.paired.push(PairedRow {
                    policy: PolicyId::Agent.label(),
                    baseline: p.label(),
                    snr_db: snr,
                    se_diff: paired_ci(&a, &b),
                });
            }
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|e| e.to_string()).unwrap_or_default()
}

/// `policy,snr_db,episodes,epsilon,se,se_ci95,success_rate,success_ci95,config_sha256`.
pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow], fingerprint: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "snr_db", "episodes", "epsilon", "se", "se_ci95", "success_rate", "success_ci95", "config_sha256"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.snr_db.to_string(),
            r.episodes.to_string(),
            opt(r.epsilon),
            r.se.mean.to_string(),
            r.se.half_width.to_string(),
            r.success.mean.to_string(),
            r.success.half_width.to_string(),
            fingerprint.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `policy,baseline,snr_db,se_diff,se_diff_ci95,significant,config_sha256`.
pub fn write_paired<W: Write>(out: W, rows: &[PairedRow], fingerprint: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "baseline", "snr_db", "se_diff", "se_diff_ci95", "significant", "config_sha256"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.baseline.clone(),
            r.snr_db.to_string(),
            r.se_diff.mean.to_string(),
            r.se_diff.half_width.to_string(),
            r.se_diff.positive().to_string(),
            fingerprint.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `policy,snr_db,epsilon,success_rate,decisions,config_sha256`.
pub fn write_calibrations<W: Write>(out: W, rows: &[CalibrationRow], fingerprint: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "snr_db", "epsilon", "success_rate", "decisions", "config_sha256"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.snr_db.to_string(),
            r.calibration.epsilon.to_string(),
            r.calibration.success.to_string(),
            r.calibration.decisions.to_string(),
            fingerprint.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Calibrates every epsilon policy in the config at every SNR point.
pub fn calibrate_all(cfg: &BenchConfig) -> Result<Vec<CalibrationRow>, SweepError> {
    let mut rows = Vec::new();
    for &snr in &cfg.bench.snr_db {
        let env = config_at(cfg, snr);
        for &policy in &cfg.bench.policies {
            if let Some(base) = epsilon_policy(policy) {
                let calibration = calibrate_epsilon(&env, &base, &cfg.bench.calibration).map_err(|source| SweepError::Calibration {
                    policy: policy.label(),
                    snr_db: snr,
                    source,
                })?;
                rows.push(CalibrationRow { policy: policy.label(), snr_db: snr, calibration });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use uwacr::baselines::RbRank;

    fn small() -> BenchConfig {
        let mut cfg = BenchConfig::default();
        cfg.scenario.horizon = 8;
        cfg.bench.snr_db = vec![10.0];
        cfg.bench.episodes = 40;
        cfg.bench.policies = vec![PolicyId::Oracle, PolicyId::Random, PolicyId::CqiEps { k: RbRank::Kth(1) }];
        cfg.bench.cqi_epsilon = Some(0.3);
        cfg
    }

    #[test]
    fn oracle_always_succeeds_and_beats_random() {
        let res = run_sweep(&small(), None).unwrap();
        let oracle = &res.rows[0];
        let random = &res.rows[1];
        assert_eq!(oracle.success.mean, 1.0);
        assert!(random.success.upper() < oracle.success.mean, "{random:?}");
        assert!(random.se.upper() < oracle.se.lower());
        assert!(res.paired.is_empty());
        assert_eq!(res.rows[2].epsilon, Some(0.3));
    }

    #[test]
    fn zero_episodes_give_an_empty_table() {
        let mut cfg = small();
        cfg.bench.episodes = 0;
        cfg.bench.policies.push(PolicyId::Agent);
        assert_eq!(run_sweep(&cfg, None).unwrap(), SweepResult::default());
    }

    #[test]
    fn agent_without_checkpoint_is_an_error() {
        let mut cfg = small();
        cfg.bench.policies = vec![PolicyId::Agent];
        assert!(matches!(run_sweep(&cfg, None), Err(SweepError::MissingAgent)));
    }

    #[test]
    fn sweeps_repeat_exactly() {
        assert_eq!(run_sweep(&small(), None).unwrap(), run_sweep(&small(), None).unwrap());
    }

    #[test]
    fn csv_rows_carry_the_fingerprint() {
        let res = run_sweep(&small(), None).unwrap();
        let mut buf = Vec::new();
        write_metrics(&mut buf, &res.rows, "abc").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("policy,snr_db"));
        assert!(lines[1..].iter().all(|l| l.ends_with(",abc")));
    }
}
