use num_complex::Complex;

use super::{ChannelError, ChannelImpulseResponse};
use crate::Real;

/// Baseband tap samples `h[0..L]` at a fixed sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel<T> {
    taps: Vec<Complex<T>>,
    period: T,
}

impl<T: Real> DiscreteChannel<T> {
    pub fn new(taps: Vec<Complex<T>>, period: T) -> Result<Self, ChannelError> {
        if !(period.is_finite() && period > T::zero()) {
            return Err(ChannelError::BadPeriod(period.to_f64_lossy()));
        }
        if taps.is_empty() {
            return Err(ChannelError::NoTaps);
        }
        let energy: T = taps.iter().map(|h| h.norm_sqr()).sum();
        if !energy.is_finite() || energy <= T::zero() {
            return Err(ChannelError::BadEnergy { energy: energy.to_f64_lossy() });
        }
        Ok(Self { taps, period })
    }

    /// Single unit tap.
    pub fn identity(period: T) -> Self {
        Self { taps: vec![Complex::new(T::one(), T::zero())], period }
    }

    pub fn taps(&self) -> &[Complex<T>] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn energy(&self) -> T {
        self.taps.iter().map(|h| h.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { taps: self.taps.iter().map(|h| h * factor).collect(), period: self.period }
    }

    pub fn rotated(&self, phase: T) -> Self {
        let r = Complex::from_polar(T::one(), phase);
        Self { taps: self.taps.iter().map(|h| h * r).collect(), period: self.period }
    }
}

/// Samples `cir` onto a grid of `period` seconds by nearest-bin accumulation.
///
/// Delays are taken as given (no bulk-delay removal); every tap must fall in a bin
/// below `max_len`. Taps sharing a bin add coherently.
pub fn discretize<T: Real>(cir: &ChannelImpulseResponse<T>, period: T, max_len: usize) -> Result<DiscreteChannel<T>, ChannelError> {
    if !(period.is_finite() && period > T::zero()) {
        return Err(ChannelError::BadPeriod(period.to_f64_lossy()));
    }
    let limit = T::from_usize_lossy(max_len) * period;
    let mut bins: Vec<(usize, Complex<T>)> = Vec::with_capacity(cir.taps().len());
    for tap in cir.taps() {
        let idx = (tap.delay / period).round();
        if tap.delay >= limit || idx >= T::from_usize_lossy(max_len) {
            return Err(ChannelError::DelayOverflow { delay: tap.delay.to_f64_lossy(), max_len, period: period.to_f64_lossy() });
        }
        bins.push((idx.to_usize().unwrap_or(0), tap.gain));
    }
    let len = bins.iter().map(|(i, _)| i + 1).max().unwrap_or(1);
    let mut h = vec![Complex::new(T::zero(), T::zero()); len];
    for (i, g) in bins {
        h[i] += g;
    }
    DiscreteChannel::new(h, period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanmodel::{Endpoint, LinkId, Tap};

    fn cir(taps: &[(f64, f64)]) -> ChannelImpulseResponse<f64> {
        let link = LinkId::new(Endpoint::Node(1), Endpoint::Sink);
        let taps = taps.iter().map(|&(d, g)| Tap { delay: d, gain: Complex::new(g, 0.0) }).collect();
        ChannelImpulseResponse::new(link, taps).unwrap()
    }

    #[test]
    fn unit_tap_at_zero_is_identity() {
        let h = discretize(&cir(&[(0.0, 1.0)]), 5e-4, 256).unwrap();
        assert_eq!(h.taps(), &[Complex::new(1.0, 0.0)]);
    }

    #[test]
    fn bin_centres_land_exactly() {
        let h = discretize(&cir(&[(0.0, 1.0), (5.0 * 5e-4, 0.5)]), 5e-4, 256).unwrap();
        let nonzero: Vec<usize> = h.taps().iter().enumerate().filter(|(_, v)| v.norm() > 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero, vec![0, 5]);
    }

    #[test]
    fn overflow_is_an_error() {
        let err = discretize(&cir(&[(0.0, 1.0), (0.2, 1.0)]), 5e-4, 256).unwrap_err();
        assert!(matches!(err, ChannelError::DelayOverflow { .. }));
        // rounds up into bin max_len
        let err = discretize(&cir(&[(255.7 * 5e-4, 1.0)]), 5e-4, 256).unwrap_err();
        assert!(matches!(err, ChannelError::DelayOverflow { .. }));
    }

    #[test]
    fn bad_period() {
        assert_eq!(discretize(&cir(&[(0.0, 1.0)]), 0.0, 8).unwrap_err(), ChannelError::BadPeriod(0.0));
    }
}
