//! Heuristic comparison policies with epsilon rate back-off, and calibration of
//! the back-off against a target rate-decision success rate.
//!
//! CQI-epsilon picks the RB with the k-th largest CQI (or a uniformly random RB),
//! ED-epsilon picks the RB with the least sensed energy. Both then send
//! `(1 - eps) log2(1 + cqi[rb])`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::env::{ActionMatrix, CrEnv, EnvConfig, EnvError, RATE_TOLERANCE};
use crate::oracle::GroundTruth;
use crate::sensing::energy_detect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("invalid baseline configuration: {0}")]
    Config(String),
    #[error("empty CQI or energy vector")]
    Empty,
    #[error("CQI has {cqi} entries but energy has {energy}")]
    LengthMismatch { cqi: usize, energy: usize },
    #[error("success target {target} is unattainable for eps in [0, 1): best is {best}")]
    Unattainable { target: f64, best: f64 },
    #[error("calibration saw no decisions on a free RB")]
    NoDecisions,
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Which CQI-ranked RB to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RankSpec", into = "RankSpec")]
pub enum RbRank {
    /// 1-based rank by decreasing CQI; ties go to the lower index.
    Kth(usize),
    Random,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RankSpec {
    Number(usize),
    Name(String),
}

impl TryFrom<RankSpec> for RbRank {
    type Error = String;

    fn try_from(v: RankSpec) -> Result<Self, String> {
        match v {
            RankSpec::Number(0) => Err("k is 1-based".into()),
            RankSpec::Number(k) => Ok(RbRank::Kth(k)),
            RankSpec::Name(s) if s == "random" => Ok(RbRank::Random),
            RankSpec::Name(s) => Err(format!("k must be a positive integer or \"random\", got {s:?}")),
        }
    }
}

impl From<RbRank> for RankSpec {
    fn from(k: RbRank) -> Self {
        match k {
            RbRank::Kth(k) => RankSpec::Number(k),
            RbRank::Random => RankSpec::Name("random".into()),
        }
    }
}

impl fmt::Display for RbRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RbRank::Kth(k) => write!(f, "k{k}"),
            RbRank::Random => write!(f, "krandom"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonMode {
    Cqi,
    Ed,
}

/// Where the baseline reads its CQI from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CqiSource {
    /// The beacon estimate in the observation, as a deployed node would.
    #[default]
    Beacon,
    /// Exact noise-only CQI.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonPolicyConfig {
    pub epsilon: f64,
    pub k: RbRank,
    pub mode: EpsilonMode,
    #[serde(default)]
    pub cqi_source: CqiSource,
}

impl EpsilonPolicyConfig {
    pub fn cqi(epsilon: f64, k: RbRank) -> Self {
        Self { epsilon, k, mode: EpsilonMode::Cqi, cqi_source: CqiSource::Beacon }
    }

    pub fn ed(epsilon: f64) -> Self {
        Self { epsilon, k: RbRank::Kth(1), mode: EpsilonMode::Ed, cqi_source: CqiSource::Beacon }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn validate(&self, n_rb: usize) -> Result<(), BaselineError> {
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(BaselineError::Config(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if let RbRank::Kth(k) = self.k {
            if k == 0 || k > n_rb {
                return Err(BaselineError::Config(format!("k must lie in 1..={n_rb}, got {k}")));
            }
        }
        Ok(())
    }

    /// Short label such as `cqi-eps-k1` or `ed-eps`.
    pub fn label(&self) -> String {
        match self.mode {
            EpsilonMode::Cqi => format!("cqi-eps-{}", self.k),
            EpsilonMode::Ed => "ed-eps".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub rb: usize,
    pub rate: f64,
}

impl Decision {
    pub fn action(&self, n_rb: usize) -> ActionMatrix {
        ActionMatrix::one_hot(n_rb, self.rb, self.rate)
    }
}

pub fn shannon_rate(cqi: f64) -> f64 {
    cqi.max(0.0).ln_1p() / std::f64::consts::LN_2
}

/// Index of the `k`-th largest entry (1-based), ties to the lower index.
fn kth_largest(v: &[f64], k: usize) -> usize {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|a, b| v[*b].total_cmp(&v[*a]).then(a.cmp(b)));
    order[k - 1]
}

/// CQI-epsilon: RB of `k`-th best CQI, or uniform when `k` is random (drawn from `seed`).
pub fn cqi_epsilon_decide(cqi: &[f64], config: &EpsilonPolicyConfig, seed: u64) -> Result<Decision, BaselineError> {
    if cqi.is_empty() {
        return Err(BaselineError::Empty);
    }
    config.validate(cqi.len())?;
    let rb = match config.k {
        RbRank::Kth(k) => kth_largest(cqi, k),
        RbRank::Random => ChaCha8Rng::seed_from_u64(seed).random_range(0..cqi.len()),
    };
    Ok(Decision { rb, rate: (1.0 - config.epsilon) * shannon_rate(cqi[rb]) })
}

/// ED-epsilon: least-energy RB (lowest index on ties), rate from its CQI.
pub fn ed_epsilon_decide(energy: &[f64], cqi: &[f64], config: &EpsilonPolicyConfig) -> Result<Decision, BaselineError> {
    if energy.is_empty() {
        return Err(BaselineError::Empty);
    }
    if energy.len() != cqi.len() {
        return Err(BaselineError::LengthMismatch { cqi: cqi.len(), energy: energy.len() });
    }
    config.validate(cqi.len())?;
    let mut rb = 0;
    for (i, e) in energy.iter().enumerate() {
        if *e < energy[rb] {
            rb = i;
        }
    }
    Ok(Decision { rb, rate: (1.0 - config.epsilon) * shannon_rate(cqi[rb]) })
}

/// Cheating upper-bound policy: best free RB at its exact rate. `None` when no RB is free.
pub fn oracle_decide(truth: &GroundTruth<f64>) -> Option<Decision> {
    truth.any_available().then(|| {
        let rb = truth.best_rb();
        Decision { rb, rate: truth.rates[rb] }
    })
}

/// Uniform RB and a uniform rate on `[0, max_rate]`.
pub fn random_decide(n_rb: usize, max_rate: f64, seed: u64) -> Decision {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rb = rng.random_range(0..n_rb);
    Decision { rb, rate: rng.random::<f64>() * max_rate }
}

/// The CQI the baseline sees in the environment's current state.
pub fn visible_cqi(env: &CrEnv, source: CqiSource) -> Result<Vec<f64>, BaselineError> {
    Ok(match source {
        CqiSource::Beacon => env.observation()?.cqi.clone(),
        CqiSource::Oracle => env.oracle_cqi()?,
    })
}

/// Per-RB energy of the current sensing observation.
pub fn sensed_energy(env: &CrEnv) -> Result<Vec<f64>, BaselineError> {
    let obs = env.observation()?;
    Ok(energy_detect(&obs.spectrum, env.phy().rb_map(), env.first_sensed_bin()))
}

/// Decision of `config` in the environment's current state.
pub fn decide_in(env: &CrEnv, config: &EpsilonPolicyConfig, seed: u64) -> Result<Decision, BaselineError> {
    let cqi = visible_cqi(env, config.cqi_source)?;
    match config.mode {
        EpsilonMode::Cqi => cqi_epsilon_decide(&cqi, config, seed),
        EpsilonMode::Ed => ed_epsilon_decide(&sensed_energy(env)?, &cqi, config),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target: f64,
    /// Accepted distance of the achieved success rate from `target`.
    pub tolerance: f64,
    /// Decisions on free RBs to collect (at least 1000).
    pub decisions: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { target: 0.9, tolerance: 0.02, decisions: 2000, iterations: 60, seed: 0 }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(BaselineError::Config(format!("target must lie in (0, 1), got {}", self.target)));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(BaselineError::Config("tolerance must be finite and nonnegative".into()));
        }
        if self.decisions < 1000 {
            return Err(BaselineError::Config(format!("at least 1000 decisions are required, got {}", self.decisions)));
        }
        Ok(())
    }
}

/// One decision on a free RB: the CQI-implied rate before back-off and the true rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionSample {
    pub cqi_rate: f64,
    pub true_rate: f64,
}

impl DecisionSample {
    pub fn succeeds(&self, epsilon: f64) -> bool {
        (1.0 - epsilon) * self.cqi_rate <= self.true_rate + RATE_TOLERANCE
    }
}

/// Plays episodes with `policy` until `count` decisions landed on a free RB.
/// The RB choice does not depend on epsilon, so the same samples serve every
/// epsilon (common random numbers).
pub fn collect_decisions(
    env_config: &EnvConfig,
    policy: &EpsilonPolicyConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<DecisionSample>, BaselineError> {
    let mut env = CrEnv::new(env_config.clone())?;
    let n_rb = env.n_rb();
    policy.validate(n_rb)?;
    let raw = policy.with_epsilon(0.0);
    let mut samples = Vec::with_capacity(count);
    let mut decision = 0u64;
    let mut episode = 0u64;
    while samples.len() < count {
        env.reset(derive_seed(seed, episode))?;
        episode += 1;
        while !env.is_done() {
            let d = decide_in(&env, &raw, derive_seed(seed ^ 0x5eed, decision))?;
            decision += 1;
            let truth = env.truth()?;
            if truth.available[d.rb] {
                samples.push(DecisionSample { cqi_rate: d.rate, true_rate: truth.rates[d.rb] });
            }
            env.step(&d.action(n_rb))?;
            if samples.len() >= count {
                break;
            }
        }
        if episode > 64 && samples.is_empty() {
            return Err(BaselineError::NoDecisions);
        }
    }
    Ok(samples)
}

pub fn success_rate(samples: &[DecisionSample], epsilon: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.succeeds(epsilon)).count() as f64 / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub epsilon: f64,
    /// Success rate at `epsilon` on the calibration decisions.
    pub success: f64,
    pub decisions: usize,
}

/// Smallest epsilon whose success rate on `samples` reaches `target`, by bisection.
pub fn calibrate_on(samples: &[DecisionSample], config: &CalibrationConfig) -> Result<Calibration, BaselineError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(BaselineError::NoDecisions);
    }
    let done = |eps: f64| Calibration { epsilon: eps, success: success_rate(samples, eps), decisions: samples.len() };
    if success_rate(samples, 0.0) >= config.target {
        return Ok(done(0.0));
    }
    let mut lo = 0.0;
    let mut hi = 1.0 - 1e-12;
    let best = success_rate(samples, hi);
    if best < config.target - config.tolerance {
        return Err(BaselineError::Unattainable { target: config.target, best });
    }
    if best < config.target {
        return Ok(done(hi));
    }
    for _ in 0..config.iterations {
        let mid = 0.5 * (lo + hi);
        if success_rate(samples, mid) >= config.target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(done(hi))
}

/// Collects decisions for `policy` on `env_config` and calibrates its epsilon.
pub fn calibrate_epsilon(
    env_config: &EnvConfig,
    policy: &EpsilonPolicyConfig,
    config: &CalibrationConfig,
) -> Result<Calibration, BaselineError> {
    config.validate()?;
    let samples = collect_decisions(env_config, policy, config.decisions, config.seed)?;
    calibrate_on(&samples, config)
}
