//! A small two-part network over flat parameter vectors: a 1-D convolution and
//! average pooling over the spectrum rows (the sensing module), then fully
//! connected tanh layers over the pooled features joined with the CQI features
//! (the main module), then a linear output layer. Gradients are hand-derived.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    fn slope<T: Real>(self, pre: T, out: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - out * out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub n_rb: usize,
    pub n_sens: usize,
    pub conv_channels: usize,
    /// Odd; zero padding keeps the row count.
    pub kernel: usize,
    /// Average-pooling width; must divide `n_sens`.
    pub pool: usize,
    pub conv_activation: Activation,
    pub hidden: Vec<usize>,
    pub n_out: usize,
}

/// Spectrum input channels: real and imaginary parts.
const IN_CHANNELS: usize = 2;

impl NetShape {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Shape(m.to_string()));
        if self.n_rb == 0 || self.n_sens == 0 || self.n_out == 0 {
            return bad("n_rb, n_sens and n_out must be positive");
        }
        if self.conv_channels == 0 {
            return bad("conv_channels must be positive");
        }
        if self.kernel.is_multiple_of(2) {
            return bad("kernel must be odd");
        }
        if self.pool == 0 || !self.n_sens.is_multiple_of(self.pool) {
            return bad("pool must divide n_sens");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    pub fn pooled_len(&self) -> usize {
        self.n_sens / self.pool
    }

    /// Width of the main module's input.
    pub fn feature_len(&self) -> usize {
        self.conv_channels * self.pooled_len() + self.n_rb
    }

    /// `(fan_in, fan_out)` of every dense layer, output layer last.
    pub fn dense_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.feature_len();
        for &h in self.hidden.iter().chain(std::iter::once(&self.n_out)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }

    fn conv_weights(&self) -> usize {
        self.conv_channels * IN_CHANNELS * self.kernel
    }

    pub fn n_params(&self) -> usize {
        self.conv_weights() + self.conv_channels + self.dense_dims().iter().map(|(i, o)| i * o + o).sum::<usize>()
    }

    /// Offset of the output layer's bias, the last `n_out` parameters.
    pub fn output_bias_offset(&self) -> usize {
        self.n_params() - self.n_out
    }

    /// Offset of the output layer's weight matrix.
    pub fn output_weight_offset(&self) -> usize {
        let (i, o) = *self.dense_dims().last().expect("output layer");
        self.output_bias_offset() - i * o
    }

    /// Glorot-uniform weights, zero biases, output layer shrunk by `out_scale`.
    pub fn init<T: Real, R: Rng + ?Sized>(&self, out_scale: f64, rng: &mut R) -> Vec<T> {
        let mut p = Vec::with_capacity(self.n_params());
        let fan_in = IN_CHANNELS * self.kernel;
        let limit = (6.0 / (fan_in + self.conv_channels) as f64).sqrt();
        p.extend((0..self.conv_weights()).map(|_| T::lit(rng.random_range(-limit..limit))));
        p.extend((0..self.conv_channels).map(|_| T::zero()));
        let dims = self.dense_dims();
        for (li, &(i, o)) in dims.iter().enumerate() {
            let scale = if li + 1 == dims.len() { out_scale } else { 1.0 };
            let limit = (6.0 / (i + o) as f64).sqrt() * scale;
            p.extend((0..i * o).map(|_| T::lit(rng.random_range(-limit..=limit))));
            p.extend((0..o).map(|_| T::zero()));
        }
        p
    }
}

/// Network inputs after the fixed feature transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs<T> {
    /// Channel-major: `n_sens` real parts, then `n_sens` imaginary parts.
    pub spectrum: Vec<T>,
    pub cqi: Vec<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    conv_pre: Vec<T>,
    conv_out: Vec<T>,
    /// `acts[0]` is the main module input; `acts[i]` the output of hidden layer `i`.
    acts: Vec<Vec<T>>,
    pub out: Vec<T>,
}

fn check_inputs<T>(shape: &NetShape, params: &[T], x: &Inputs<T>) -> Result<(), AgentError> {
    if params.len() != shape.n_params() {
        return Err(AgentError::Shape(format!("{} parameters, expected {}", params.len(), shape.n_params())));
    }
    if x.spectrum.len() != IN_CHANNELS * shape.n_sens {
        return Err(AgentError::Shape(format!("spectrum has {} values, expected {}", x.spectrum.len(), IN_CHANNELS * shape.n_sens)));
    }
    if x.cqi.len() != shape.n_rb {
        return Err(AgentError::Shape(format!("cqi has {} entries, expected {}", x.cqi.len(), shape.n_rb)));
    }
    Ok(())
}

pub fn forward<T: Real>(shape: &NetShape, params: &[T], x: &Inputs<T>) -> Result<Cache<T>, AgentError> {
    check_inputs(shape, params, x)?;
    let (c_n, k_n, n, pool) = (shape.conv_channels, shape.kernel, shape.n_sens, shape.pool);
    let half = k_n / 2;
    let (w_conv, rest) = params.split_at(shape.conv_weights());
    let (b_conv, mut rest) = rest.split_at(c_n);

    let mut conv_pre = vec![T::zero(); c_n * n];
    for c in 0..c_n {
        for pos in 0..n {
            let mut acc = b_conv[c];
            for ch in 0..IN_CHANNELS {
                let w = &w_conv[(c * IN_CHANNELS + ch) * k_n..][..k_n];
                let row = &x.spectrum[ch * n..][..n];
                for (j, wj) in w.iter().enumerate() {
                    let src = pos + j;
                    if src >= half && src - half < n {
                        acc += *wj * row[src - half];
                    }
                }
            }
            conv_pre[c * n + pos] = acc;
        }
    }
    let conv_out: Vec<T> = conv_pre.iter().map(|v| shape.conv_activation.apply(*v)).collect();

    let inv_pool = T::one() / T::from_usize_lossy(pool);
    let mut features = Vec::with_capacity(shape.feature_len());
    for c in 0..c_n {
        for q in 0..shape.pooled_len() {
            features.push(conv_out[c * n + q * pool..][..pool].iter().copied().sum::<T>() * inv_pool);
        }
    }
    features.extend_from_slice(&x.cqi);

    let dims = shape.dense_dims();
    let mut acts = vec![features];
    let mut out = Vec::new();
    for (li, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let (w, r) = rest.split_at(fan_in * fan_out);
        let (b, r) = r.split_at(fan_out);
        rest = r;
        let input = acts.last().expect("input layer");
        let z: Vec<T> = (0..fan_out).map(|o| b[o] + w[o * fan_in..][..fan_in].iter().zip(input).map(|(a, b)| *a * *b).sum::<T>()).collect();
        if li + 1 == dims.len() {
            out = z;
        } else {
            acts.push(z.into_iter().map(|v| v.tanh()).collect());
        }
    }
    Ok(Cache { conv_pre, conv_out, acts, out })
}

/// Adds `d out / d params` contracted with `d_out` into `grad`.
pub fn backward<T: Real>(shape: &NetShape, params: &[T], x: &Inputs<T>, cache: &Cache<T>, d_out: &[T], grad: &mut [T]) {
    let (c_n, k_n, n, pool) = (shape.conv_channels, shape.kernel, shape.n_sens, shape.pool);
    let half = k_n / 2;
    let dims = shape.dense_dims();

    // dense layers, last to first
    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = shape.conv_weights() + c_n;
    for &(i, o) in &dims {
        offsets.push(off);
        off += i * o + o;
    }
    let mut delta: Vec<T> = d_out.to_vec();
    for li in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[li];
        let w_off = offsets[li];
        let b_off = w_off + fan_in * fan_out;
        let input = &cache.acts[li];
        for o in 0..fan_out {
            let d = delta[o];
            grad[b_off + o] += d;
            if d != T::zero() {
                for (g, a) in grad[w_off + o * fan_in..][..fan_in].iter_mut().zip(input) {
                    *g += d * *a;
                }
            }
        }
        let mut d_in = vec![T::zero(); fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            if d != T::zero() {
                for (di, w) in d_in.iter_mut().zip(&params[w_off + o * fan_in..][..fan_in]) {
                    *di += d * *w;
                }
            }
        }
        if li > 0 {
            // through the tanh of the previous hidden layer
            for (di, a) in d_in.iter_mut().zip(input) {
                *di *= T::one() - *a * *a;
            }
        }
        delta = d_in;
    }

    // pooling and convolution
    let inv_pool = T::one() / T::from_usize_lossy(pool);
    let b_conv = shape.conv_weights();
    for c in 0..c_n {
        for pos in 0..n {
            let d_pool = delta[c * shape.pooled_len() + pos / pool] * inv_pool;
            let idx = c * n + pos;
            let d = d_pool * shape.conv_activation.slope(cache.conv_pre[idx], cache.conv_out[idx]);
            if d == T::zero() {
                continue;
            }
            grad[b_conv + c] += d;
            for ch in 0..IN_CHANNELS {
                let row = &x.spectrum[ch * n..][..n];
                let g = &mut grad[(c * IN_CHANNELS + ch) * k_n..][..k_n];
                for (j, gj) in g.iter_mut().enumerate() {
                    let src = pos + j;
                    if src >= half && src - half < n {
                        *gj += d * row[src - half];
                    }
                }
            }
        }
    }
}
