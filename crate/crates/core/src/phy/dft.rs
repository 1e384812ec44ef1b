use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::Real;

/// Unitary DFT of a fixed size: `forward` applies `F`, `inverse` applies `F^H`.
#[derive(Clone)]
pub struct Dft<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> Dft<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: T::one() / T::from_usize_lossy(n).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward_in_place(&self, x: &mut [Complex<T>]) {
        self.forward.process(x);
        x.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn inverse_in_place(&self, x: &mut [Complex<T>]) {
        self.inverse.process(x);
        x.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn forward(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = x.to_vec();
        self.forward_in_place(&mut y);
        y
    }

    pub fn inverse(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = x.to_vec();
        self.inverse_in_place(&mut y);
        y
    }

    /// Unnormalised transform `sqrt(n) * F x`; the eigenvalues of a circulant matrix.
    pub fn unnormalized(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = x.to_vec();
        self.forward.process(&mut y);
        y
    }
}
