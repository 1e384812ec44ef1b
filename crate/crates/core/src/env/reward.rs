use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::oracle::GroundTruth;

/// `A_t`: a probability per RB and a rate per RB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMatrix {
    pub rb_probs: Vec<f64>,
    pub rates: Vec<f64>,
}

impl ActionMatrix {
    pub fn new(rb_probs: Vec<f64>, rates: Vec<f64>) -> Result<Self, EnvError> {
        let a = Self { rb_probs, rates };
        a.validate()?;
        Ok(a)
    }

    /// All mass on `rb`, `rate` there and zero elsewhere.
    pub fn one_hot(n_rb: usize, rb: usize, rate: f64) -> Self {
        let mut rb_probs = vec![0.0; n_rb];
        let mut rates = vec![0.0; n_rb];
        rb_probs[rb] = 1.0;
        rates[rb] = rate;
        Self { rb_probs, rates }
    }

    pub fn n_rb(&self) -> usize {
        self.rb_probs.len()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.rb_probs.is_empty() || self.rb_probs.len() != self.rates.len() {
            return Err(EnvError::BadAction(format!("{} probabilities and {} rates", self.rb_probs.len(), self.rates.len())));
        }
        if self.rb_probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(EnvError::BadAction("probabilities must be finite and nonnegative".into()));
        }
        let sum: f64 = self.rb_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EnvError::BadAction(format!("probabilities sum to {sum}")));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(EnvError::BadAction("rates must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// `argmax(rates * probs)`, lowest index on ties, and the rate there.
pub fn select_decision(a: &ActionMatrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (p, r)) in a.rb_probs.iter().zip(&a.rates).enumerate() {
        let score = p * r;
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    (best, a.rates[best])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub w6: f64,
    pub w7: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { w1: 1.0, w2: 1.0, w3: 1.0, w4: 1.0, w5: 0.5, w6: 0.5, w7: 1.0 }
    }
}

impl RewardWeights {
    pub fn from_array(w: [f64; 7]) -> Self {
        Self { w1: w[0], w2: w[1], w3: w[2], w4: w[3], w5: w[4], w6: w[5], w7: w[6] }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.w1, self.w2, self.w3, self.w4, self.w5, self.w6, self.w7]
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let w = self.as_array();
        if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(EnvError::InvalidConfig(format!("reward.w{} must be finite and nonnegative", i + 1)));
        }
        if self.w5 == 0.0 && self.w6 == 0.0 && self.w7 == 0.0 {
            return Err(EnvError::InvalidConfig("reward: one of w5, w6, w7 must be positive".into()));
        }
        Ok(())
    }
}

/// What the last reward term pays for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThroughputTerm {
    /// The agent's own rate at its chosen RB, paid whether or not the packet succeeds.
    Estimate,
    /// The chosen rate on success, zero on failure.
    #[default]
    Realized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub r_rb: f64,
    pub r_rate: f64,
    /// `rates[argmax(rates * probs)]`.
    pub throughput: f64,
    pub total: f64,
}

/// `-ln p`, with `p` floored at the smallest positive normal so that one-hot
/// actions yield a large finite penalty instead of infinity.
fn cross_entropy(p: f64) -> f64 {
    -p.max(f64::MIN_POSITIVE).ln()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// The RB-selection term: `-w1 CE(p, best) - w2 MSE(p, v_RB)`.
pub fn rb_term(probs: &[f64], truth: &GroundTruth<f64>, w: &RewardWeights) -> f64 {
    let best = truth.best_rb();
    -w.w1 * cross_entropy(probs[best]) - w.w2 * mse(probs, &truth.v_rb())
}

/// The rate term: `-w3 MSE(clipped, v_rate) - w4 (rates[best] - max v_rate)^2`,
/// where estimates above the true rate are zeroed before the first MSE.
pub fn rate_term(rates: &[f64], truth: &GroundTruth<f64>, w: &RewardWeights) -> f64 {
    let clipped: Vec<f64> = rates.iter().zip(&truth.rates).map(|(r, v)| if r > v { 0.0 } else { *r }).collect();
    let best = truth.best_rb();
    -w.w3 * mse(&clipped, &truth.rates) - w.w4 * (rates[best] - truth.rates[best]).powi(2)
}

/// The reward as written, with the throughput term taken from the agent's estimate.
pub fn compute_reward(a: &ActionMatrix, truth: &GroundTruth<f64>, w: &RewardWeights) -> Result<RewardBreakdown, EnvError> {
    if a.n_rb() != truth.n_rb() {
        return Err(EnvError::BadAction(format!("action has {} RBs, truth has {}", a.n_rb(), truth.n_rb())));
    }
    if !truth.any_available() {
        return Err(EnvError::NoFreeRb);
    }
    let r_rb = rb_term(&a.rb_probs, truth, w);
    let r_rate = rate_term(&a.rates, truth, w);
    let (_, throughput) = select_decision(a);
    Ok(RewardBreakdown { r_rb, r_rate, throughput, total: w.w5 * r_rb + w.w6 * r_rate + w.w7 * throughput })
}

/// The probability vector maximising the RB term for `truth`.
///
/// With `c = 2 w2 / N`, stationarity gives `p_i = max(0, v_i - mu / c)` off the best
/// RB `j` and the positive root of `c p^2 + (mu - c v_j) p - w1 = 0` on it; `mu` is
/// found by bisection so the vector sums to one.
pub fn optimal_rb_probs(truth: &GroundTruth<f64>, w: &RewardWeights) -> Vec<f64> {
    let n = truth.n_rb();
    let j = truth.best_rb();
    let v = truth.v_rb();
    if w.w2 == 0.0 {
        let mut p = vec![0.0; n];
        p[j] = 1.0;
        return p;
    }
    let c = 2.0 * w.w2 / n as f64;
    let probs = |mu: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if i == j {
                    let b = mu - c * v[j];
                    if w.w1 == 0.0 {
                        (-b / c).max(0.0)
                    } else {
                        (-b + (b * b + 4.0 * c * w.w1).sqrt()) / (2.0 * c)
                    }
                } else {
                    (v[i] - mu / c).max(0.0)
                }
            })
            .collect()
    };
    // the sum is nonincreasing in mu; bracket the root
    let total = |mu: f64| probs(mu).iter().sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while total(lo) < 1.0 {
        lo *= 2.0;
    }
    while total(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = probs(0.5 * (lo + hi));
    let s: f64 = p.iter().sum();
    p.into_iter().map(|x| x / s).collect()
}

/// The best action available to an omniscient agent: optimal probabilities and
/// exact rates. It transmits on the best free RB at exactly its achievable rate.
pub fn oracle_action(truth: &GroundTruth<f64>, w: &RewardWeights) -> ActionMatrix {
    ActionMatrix { rb_probs: optimal_rb_probs(truth, w), rates: truth.rates.clone() }
}

/// Reward of [`oracle_action`], which upper-bounds the expected reward of any
/// policy in this state under either throughput term. Zero when no RB is free.
pub fn oracle_best_reward(truth: &GroundTruth<f64>, w: &RewardWeights) -> f64 {
    if !truth.any_available() {
        return 0.0;
    }
    let p = optimal_rb_probs(truth, w);
    w.w5 * rb_term(&p, truth, w) + w.w7 * truth.max_rate()
}
