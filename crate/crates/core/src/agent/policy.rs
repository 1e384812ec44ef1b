use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::net::{backward, forward, Cache, Inputs, NetShape};
use serde::{Deserialize, Serialize};

use super::smooth;
use super::AgentError;
use crate::env::{ActionMatrix, RewardWeights, ThroughputTerm};
use crate::oracle::GroundTruth;
use crate::sensing::Observation;
use crate::Real;

/// Fixed input transform: `log2(1 + cqi)` and a signed `ln(1 + |x|)` on the
/// spectrum, which tames the dynamic range of strong interferers.
pub fn inputs_from<T: Real>(obs: &Observation<f64>, n_rb: usize, n_sens: usize) -> Result<Inputs<T>, AgentError> {
    if obs.cqi.len() != n_rb {
        return Err(AgentError::Shape(format!("observation has {} CQI entries, expected {n_rb}", obs.cqi.len())));
    }
    if obs.spectrum.len() != n_sens {
        return Err(AgentError::Shape(format!("observation has {} spectrum rows, expected {n_sens}", obs.spectrum.len())));
    }
    let slog = |x: f64| x.signum() * x.abs().ln_1p();
    let mut spectrum = Vec::with_capacity(2 * n_sens);
    spectrum.extend(obs.spectrum.iter().map(|r| T::lit(slog(r[0]))));
    spectrum.extend(obs.spectrum.iter().map(|r| T::lit(slog(r[1]))));
    let cqi = obs.cqi.iter().map(|c| T::lit(c.max(0.0).ln_1p() / std::f64::consts::LN_2)).collect();
    Ok(Inputs { spectrum, cqi })
}

fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn softmax<T: Real>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|v| (*v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Actor heads: RB probabilities (softmax) and nonnegative rates (softplus).
#[derive(Debug, Clone)]
pub struct ActorOutput<T> {
    pub probs: Vec<T>,
    pub rates: Vec<T>,
    cache: Cache<T>,
}

impl<T: Real> ActorOutput<T> {
    fn rate_pre(&self, rb: usize) -> T {
        self.cache.out[self.probs.len() + rb]
    }

    /// The action matrix handed to the environment, with `rates[rb]` replaced by `rate`.
    pub fn action(&self, rb: usize, rate: T) -> ActionMatrix {
        let p: Vec<f64> = self.probs.iter().map(|v| v.to_f64_lossy()).collect();
        let s: f64 = p.iter().sum();
        let mut rates: Vec<f64> = self.rates.iter().map(|v| v.to_f64_lossy().max(0.0)).collect();
        rates[rb] = rate.to_f64_lossy().max(0.0);
        ActionMatrix { rb_probs: p.into_iter().map(|v| v / s).collect(), rates }
    }

    /// Arg-max decision over the heads, as the environment would take it.
    pub fn greedy_action(&self) -> ActionMatrix {
        let rb = argmax(&self.probs);
        self.action(rb, self.rates[rb])
    }
}

pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn actor_forward<T: Real>(shape: &NetShape, params: &[T], x: &Inputs<T>) -> Result<ActorOutput<T>, AgentError> {
    if shape.n_out != 2 * shape.n_rb {
        return Err(AgentError::Shape(format!("actor needs {} outputs, shape has {}", 2 * shape.n_rb, shape.n_out)));
    }
    let cache = forward(shape, params, x)?;
    let n = shape.n_rb;
    let probs = softmax(&cache.out[..n]);
    let rates = cache.out[n..].iter().map(|v| softplus(*v)).collect();
    Ok(ActorOutput { probs, rates, cache })
}

pub fn critic_forward<T: Real>(shape: &NetShape, params: &[T], x: &Inputs<T>) -> Result<T, AgentError> {
    if shape.n_out != 1 {
        return Err(AgentError::Shape(format!("critic needs one output, shape has {}", shape.n_out)));
    }
    Ok(forward(shape, params, x)?.out[0])
}

/// A drawn action: the RB, the Gaussian rate samples before clamping, the rate
/// actually sent on the RB, and the joint log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub rb: usize,
    pub raw_rates: Vec<T>,
    pub rate: T,
    pub log_prob: T,
}

impl<T: Real> Sample<T> {
    /// The action matrix carrying the sampled (clamped) rates.
    pub fn action(&self, out: &ActorOutput<T>) -> ActionMatrix {
        let mut a = out.action(self.rb, self.rate);
        for (r, raw) in a.rates.iter_mut().zip(&self.raw_rates) {
            *r = raw.to_f64_lossy().max(0.0);
        }
        a
    }
}

/// `ln p[rb]` plus the Gaussian log-density of every raw rate around its head
/// (omitted when `sigma` is zero).
pub fn log_prob<T: Real>(out: &ActorOutput<T>, rb: usize, raw_rates: &[T], sigma: T) -> T {
    let mut lp = out.probs[rb].max(T::min_positive_value()).ln();
    if sigma > T::zero() {
        let norm = sigma.ln() + T::lit(0.5) * T::TAU().ln();
        for (x, mu) in raw_rates.iter().zip(&out.rates) {
            let z = (*x - *mu) / sigma;
            lp -= T::lit(0.5) * z * z + norm;
        }
    }
    lp
}

/// Explore: RB from the categorical head, rates = heads + N(0, sigma^2), sent
/// clamped at 0. Greedy: arg-max RB (lowest index on ties) and the heads exactly.
pub fn sample_action<T: Real, R: Rng + ?Sized>(out: &ActorOutput<T>, sigma: T, explore: bool, rng: &mut R) -> Sample<T> {
    let (rb, raw_rates) = if explore {
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        let mut rb = out.probs.len() - 1;
        for (i, p) in out.probs.iter().enumerate() {
            acc += *p;
            if u < acc {
                rb = i;
                break;
            }
        }
        let raw: Vec<T> = out
            .rates
            .iter()
            .map(|r| {
                let eps: f64 = StandardNormal.sample(rng);
                *r + sigma * T::lit(eps)
            })
            .collect();
        (rb, raw)
    } else {
        (argmax(&out.probs), out.rates.clone())
    };
    let log_prob = log_prob(out, rb, &raw_rates, sigma);
    Sample { rb, rate: raw_rates[rb].max(T::zero()), raw_rates, log_prob }
}

/// How the rate heads learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateGradient {
    /// Score function on the Gaussian rate samples plus the rate term on the
    /// heads themselves.
    Score,
    /// Exact gradient of the rate-dependent reward terms averaged over the
    /// exploration noise; the score function only drives the RB head.
    #[default]
    Analytic,
}

/// Coefficients of the actor objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorObjective {
    pub entropy: f64,
    /// Weight of the differentiable reward terms evaluated on the heads.
    pub aux: f64,
    pub reward: RewardWeights,
    pub throughput: ThroughputTerm,
    pub rate_gradient: RateGradient,
}

/// One transition's contribution to the actor objective.
#[derive(Debug, Clone)]
pub struct ActorStep<'a, T> {
    pub inputs: &'a Inputs<T>,
    pub rb: usize,
    pub raw_rates: &'a [T],
    pub sigma: T,
    pub advantage: T,
    /// Absent when the step had no free RB.
    pub truth: Option<&'a GroundTruth<f64>>,
}

/// Score mode: `J = a log pi(A|S) + beta H(p) + kappa (w5 r_RB(p) + w6 r_rate(rates))`.
/// Analytic mode: `J = a ln p[rb] + beta H(p) + kappa (w5 r_RB(p) + w6 E r_rate + w7 E thr)`
/// with the expectations over the rate noise.
/// Adds `scale * dJ/dtheta` into `grad` and returns `J`.
pub fn actor_objective<T: Real>(
    shape: &NetShape,
    params: &[T],
    step: &ActorStep<'_, T>,
    obj: &ActorObjective,
    scale: T,
    grad: &mut [T],
) -> Result<T, AgentError> {
    let out = actor_forward(shape, params, step.inputs)?;
    let n = shape.n_rb;
    if step.raw_rates.len() != n {
        return Err(AgentError::Shape(format!("{} sampled rates for {n} RBs", step.raw_rates.len())));
    }
    let p = &out.probs;
    let adv = step.advantage;
    let analytic = obj.rate_gradient == RateGradient::Analytic;

    let mut d_p = vec![T::zero(); n];
    let mut d_logit = vec![T::zero(); n];
    let mut d_rate = vec![T::zero(); n];
    let mut value;
    for (i, dl) in d_logit.iter_mut().enumerate() {
        let onehot = if i == step.rb { T::one() } else { T::zero() };
        *dl += adv * (onehot - p[i]);
    }
    if analytic {
        value = p[step.rb].max(T::min_positive_value()).ln() * adv;
    } else {
        value = log_prob(&out, step.rb, step.raw_rates, step.sigma) * adv;
        if step.sigma > T::zero() {
            for i in 0..n {
                d_rate[i] += adv * (step.raw_rates[i] - out.rates[i]) / (step.sigma * step.sigma);
            }
        }
    }

    let beta = T::lit(obj.entropy);
    if beta != T::zero() {
        let logs: Vec<T> = p.iter().map(|v| v.max(T::min_positive_value()).ln()).collect();
        let h = -p.iter().zip(&logs).map(|(a, b)| *a * *b).sum::<T>();
        value += beta * h;
        for i in 0..n {
            d_logit[i] -= beta * p[i] * (logs[i] + h);
        }
    }

    if let (Some(truth), true) = (step.truth, obj.aux != 0.0) {
        if truth.any_available() {
            let w = &obj.reward;
            let kappa = T::lit(obj.aux);
            let nn = T::from_usize_lossy(n);
            let best = truth.best_rb();
            let v_rb: Vec<T> = truth.available.iter().map(|a| if *a { T::one() } else { T::zero() }).collect();

            let (w1, w2, w3, w4, w5, w6, w7) =
                (T::lit(w.w1), T::lit(w.w2), T::lit(w.w3), T::lit(w.w4), T::lit(w.w5), T::lit(w.w6), T::lit(w.w7));
            let pj = p[best].max(T::min_positive_value());
            let mse_rb = p.iter().zip(&v_rb).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() / nn;
            let r_rb = w1 * pj.ln() - w2 * mse_rb;
            for i in 0..n {
                let mut g = -(T::lit(2.0) * w2 / nn) * (p[i] - v_rb[i]);
                if i == best {
                    g += w1 / pj;
                }
                d_p[i] += kappa * w5 * g;
            }
            value += kappa * w5 * r_rb;

            let sigma = if analytic { step.sigma.to_f64_lossy().max(0.0) } else { 0.0 };
            let mut r_rate = T::zero();
            for i in 0..n {
                let e = smooth::clipped_sq_error(out.rates[i].to_f64_lossy(), truth.rates[i], sigma);
                r_rate -= w3 / nn * T::lit(e.value);
                d_rate[i] -= kappa * w6 * w3 / nn * T::lit(e.slope);
            }
            let e = smooth::sq_error(out.rates[best].to_f64_lossy(), truth.rates[best], sigma);
            r_rate -= w4 * T::lit(e.value);
            d_rate[best] -= kappa * w6 * w4 * T::lit(e.slope);
            value += kappa * w6 * r_rate;

            if analytic {
                let mu = out.rates[step.rb].to_f64_lossy();
                let thr = match obj.throughput {
                    ThroughputTerm::Estimate => Some(smooth::sent_rate(mu, sigma)),
                    ThroughputTerm::Realized if truth.available[step.rb] => Some(smooth::realized_rate(mu, truth.rates[step.rb], sigma)),
                    ThroughputTerm::Realized => None,
                };
                if let Some(t) = thr {
                    value += kappa * w7 * T::lit(t.value);
                    d_rate[step.rb] += kappa * w7 * T::lit(t.slope);
                }
            }
        }
    }

    let pg: T = p.iter().zip(&d_p).map(|(a, b)| *a * *b).sum();
    let mut d_out = vec![T::zero(); 2 * n];
    for i in 0..n {
        d_out[i] = scale * (d_logit[i] + p[i] * (d_p[i] - pg));
        d_out[n + i] = scale * d_rate[i] * sigmoid(out.rate_pre(i));
    }
    backward(shape, params, step.inputs, &out.cache, &d_out, grad);
    Ok(value)
}

/// `1/2 (V(S) - target)^2`; adds `scale * dL/dw` into `grad` and returns the loss.
pub fn critic_loss<T: Real>(
    shape: &NetShape,
    params: &[T],
    inputs: &Inputs<T>,
    target: T,
    scale: T,
    grad: &mut [T],
) -> Result<T, AgentError> {
    let cache = forward(shape, params, inputs)?;
    let err = cache.out[0] - target;
    backward(shape, params, inputs, &cache, &[scale * err], grad);
    Ok(T::lit(0.5) * err * err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::net::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape() -> NetShape {
        NetShape { n_rb: 3, n_sens: 4, conv_channels: 2, kernel: 3, pool: 2, conv_activation: Activation::Relu, hidden: vec![6], n_out: 6 }
    }

    fn obs(rng: &mut ChaCha8Rng) -> Observation<f64> {
        Observation {
            cqi: (0..3).map(|_| rng.random_range(0.0..20.0)).collect(),
            spectrum: (0..4).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect(),
        }
    }

    #[test]
    fn heads_are_valid() {
        let s = shape();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p: Vec<f64> = s.init(3.0, &mut rng);
            let x = inputs_from(&obs(&mut rng), 3, 4).unwrap();
            let out = actor_forward(&s, &p, &x).unwrap();
            assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(out.probs.iter().all(|v| *v > 0.0));
            assert!(out.rates.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn greedy_sample_is_argmax_and_head_rate() {
        let s = shape();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p: Vec<f64> = s.init(1.0, &mut rng);
        let out = actor_forward(&s, &p, &inputs_from(&obs(&mut rng), 3, 4).unwrap()).unwrap();
        let smp = sample_action(&out, 0.5, false, &mut rng);
        assert_eq!(smp.rb, argmax(&out.probs));
        assert_eq!(smp.rate, out.rates[smp.rb]);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let s = shape();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = s.init(1.0, &mut rng);
        let x = inputs_from(&obs(&mut rng), 3, 4).unwrap();
        let truth = GroundTruth { available: vec![true, false, true], rates: vec![0.4, 0.0, 1.1] };
        let raw = [0.3, -0.1, 0.9];
        for mode in [RateGradient::Score, RateGradient::Analytic] {
            for throughput in [ThroughputTerm::Estimate, ThroughputTerm::Realized] {
                let obj = ActorObjective { entropy: 0.1, aux: 0.7, reward: RewardWeights::default(), throughput, rate_gradient: mode };
                let step = ActorStep { inputs: &x, rb: 2, raw_rates: &raw, sigma: 0.3, advantage: -0.8, truth: Some(&truth) };
                let mut g = vec![0.0; s.n_params()];
                actor_objective(&s, &p, &step, &obj, 1.0, &mut g).unwrap();
                let mut sink = vec![0.0; s.n_params()];
                for i in 0..p.len() {
                    let mut a = p.clone();
                    let mut b = p.clone();
                    a[i] += 1e-6;
                    b[i] -= 1e-6;
                    let fa = actor_objective(&s, &a, &step, &obj, 0.0, &mut sink).unwrap();
                    let fb = actor_objective(&s, &b, &step, &obj, 0.0, &mut sink).unwrap();
                    let fd = (fa - fb) / 2e-6;
                    assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "{mode:?} param {i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn explore_perturbs_every_rate() {
        let s = shape();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<f64> = s.init(1.0, &mut rng);
        let out = actor_forward(&s, &p, &inputs_from(&obs(&mut rng), 3, 4).unwrap()).unwrap();
        let smp = sample_action(&out, 0.5, true, &mut rng);
        assert!(smp.raw_rates.iter().zip(&out.rates).all(|(a, b)| a != b));
        assert_eq!(smp.rate, smp.raw_rates[smp.rb].max(0.0));
        assert!((smp.log_prob - log_prob(&out, smp.rb, &smp.raw_rates, 0.5)).abs() < 1e-12);
    }
}
