//! OFDM symbol construction and the synchronous / asynchronous channel operators.
//!
//! The victim node's own signal passes a circulant operator (its CIR fits in the
//! cyclic prefix). An interferer's CP-prefixed stream is linearly convolved with
//! its channel and cut to the victim's FFT window, shifted by the time gap `g`:
//! victim-frame sample `n` sees interferer-local sample `n + g`.

mod circulant;
mod config;
mod dft;
mod stream;
mod synth;

pub use circulant::{build_circulant, CirculantOperator};
pub use config::{OfdmConfig, RbMap};
pub use dft::Dft;
pub use stream::{build_windowed_toeplitz, DataSymbol, SampleStream};
pub use synth::{synthesize_received, InterfererSpec, ReceivedSymbol};

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("invalid OFDM configuration: {0}")]
    InvalidConfig(String),
    #[error("channel has {len} taps but the FFT size is {n_fft}")]
    ChannelTooLong { len: usize, n_fft: usize },
    #[error("interferer stream covers samples {have:?} but the window needs {needed:?}")]
    WindowUnderrun { needed: (isize, isize), have: (isize, isize) },
    #[error("vector length {found} does not match FFT size {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("subcarrier {bin} is outside 0..{n_fft}")]
    BinOutOfRange { bin: usize, n_fft: usize },
    #[error("interferer {node} carries {found} data symbols, the window overlaps {expected}")]
    MissingData { node: usize, expected: usize, found: usize },
    #[error("channel sampling period {found} differs from the OFDM sample period {expected}")]
    PeriodMismatch { expected: f64, found: f64 },
}

/// OFDM numerology bundled with its FFT plans.
#[derive(Clone)]
pub struct OfdmPhy<T: Real> {
    config: OfdmConfig,
    rb_map: RbMap,
    cp_len: usize,
    dft: Dft<T>,
}

impl<T: Real> std::fmt::Debug for OfdmPhy<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmPhy").field("config", &self.config).field("cp_len", &self.cp_len).finish()
    }
}

impl<T: Real> OfdmPhy<T> {
    pub fn new(config: OfdmConfig) -> Result<Self, PhyError> {
        config.validate()?;
        let rb_map = config.rb_map();
        let cp_len = config.cp_len();
        let dft = Dft::new(config.n_fft);
        Ok(Self { config, rb_map, cp_len, dft })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    pub fn n_fft(&self) -> usize {
        self.config.n_fft
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// CP plus FFT body, in samples.
    pub fn symbol_len(&self) -> usize {
        self.config.n_fft + self.cp_len
    }

    pub fn sample_period(&self) -> T {
        T::lit(self.config.sample_period())
    }

    pub fn rb_map(&self) -> &RbMap {
        &self.rb_map
    }

    pub fn dft(&self) -> &Dft<T> {
        &self.dft
    }
}

pub(crate) fn zeros<T: Real>(n: usize) -> Vec<Complex<T>> {
    vec![Complex::new(T::zero(), T::zero()); n]
}

/// Circular complex Gaussian sample with `E|x|^2 = variance`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(variance: T, rng: &mut R) -> Complex<T> {
    let s = (variance.to_f64_lossy() / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(T::lit(re * s), T::lit(im * s))
}
