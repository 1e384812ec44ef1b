//! Expectations of the rate-dependent reward terms when the sent rate is
//! `max(0, mu + sigma * eps)` with standard normal `eps`, and their derivatives
//! in `mu`. With `sigma = 0` they reduce to the plain terms and their
//! (almost-everywhere) derivatives.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothed {
    pub value: f64,
    pub slope: f64,
}

fn pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / TAU.sqrt()
    }
}

fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

fn step(mu: f64) -> f64 {
    if mu > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `E[(m - v)^2]` where `m` is the sent rate, or zero if it exceeds `v`, plus
/// `v^2` in that case: the per-RB summand of the clipped rate MSE.
pub fn clipped_sq_error(mu: f64, v: f64, sigma: f64) -> Smoothed {
    if sigma <= 0.0 {
        let r = mu.max(0.0);
        return if r <= v {
            Smoothed { value: (r - v).powi(2), slope: 2.0 * (r - v) * step(mu) }
        } else {
            Smoothed { value: v * v, slope: 0.0 }
        };
    }
    let a = -mu / sigma;
    let b = (v - mu) / sigma;
    let (fa, fb, pa, pb) = (cdf(a), cdf(b), pdf(a), pdf(b));
    let c = mu - v;
    let inner = c * c * (fb - fa) + 2.0 * c * sigma * (pa - pb) + sigma * sigma * ((fb - fa) + a * pa - b * pb);
    let value = v * v * fa + inner + v * v * (1.0 - fb);
    let slope = 2.0 * (c * (fb - fa) + sigma * (pa - pb)) + v * v * pb / sigma;
    Smoothed { value, slope }
}

/// `E[(max(0, x) - v)^2]`.
pub fn sq_error(mu: f64, v: f64, sigma: f64) -> Smoothed {
    if sigma <= 0.0 {
        let r = mu.max(0.0);
        return Smoothed { value: (r - v).powi(2), slope: 2.0 * (r - v) * step(mu) };
    }
    let a = -mu / sigma;
    let (fa, pa) = (cdf(a), pdf(a));
    let c = mu - v;
    let value = v * v * fa + c * c * (1.0 - fa) + 2.0 * c * sigma * pa + sigma * sigma * ((1.0 - fa) + a * pa);
    let slope = 2.0 * (c * (1.0 - fa) + sigma * pa);
    Smoothed { value, slope }
}

/// `E[m 1{m <= v}]`: throughput that is paid only when the rate is achievable.
pub fn realized_rate(mu: f64, v: f64, sigma: f64) -> Smoothed {
    if sigma <= 0.0 {
        let r = mu.max(0.0);
        return if r <= v { Smoothed { value: r, slope: step(mu) } } else { Smoothed { value: 0.0, slope: 0.0 } };
    }
    let a = -mu / sigma;
    let b = (v - mu) / sigma;
    let (fa, fb, pa, pb) = (cdf(a), cdf(b), pdf(a), pdf(b));
    Smoothed { value: mu * (fb - fa) + sigma * (pa - pb), slope: fb - fa - v / sigma * pb }
}

/// `E[max(0, x)]`.
pub fn sent_rate(mu: f64, sigma: f64) -> Smoothed {
    if sigma <= 0.0 {
        return Smoothed { value: mu.max(0.0), slope: step(mu) };
    }
    let a = -mu / sigma;
    Smoothed { value: mu * (1.0 - cdf(a)) + sigma * pdf(a), slope: 1.0 - cdf(a) }
}
