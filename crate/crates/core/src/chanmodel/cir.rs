use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::ChannelError;
use crate::Real;

/// End of an acoustic link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Sink,
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkId {
    pub src: Endpoint,
    pub dst: Endpoint,
}

impl LinkId {
    pub fn new(src: Endpoint, dst: Endpoint) -> Self {
        Self { src, dst }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap<T> {
    /// Seconds.
    pub delay: T,
    pub gain: Complex<T>,
}

/// Continuous-delay multipath arrival list of one link.
///
/// Taps are sorted by nondecreasing delay, there is at least one, and the total
/// energy is finite and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse<T> {
    link: LinkId,
    taps: Vec<Tap<T>>,
}

impl<T: Real> ChannelImpulseResponse<T> {
    pub fn new(link: LinkId, taps: Vec<Tap<T>>) -> Result<Self, ChannelError> {
        if taps.is_empty() {
            return Err(ChannelError::NoTaps);
        }
        for (index, tap) in taps.iter().enumerate() {
            if !tap.delay.is_finite() || tap.delay < T::zero() {
                return Err(ChannelError::InvalidDelay { index, delay: tap.delay.to_f64_lossy() });
            }
            if index > 0 && tap.delay < taps[index - 1].delay {
                return Err(ChannelError::Unsorted { index });
            }
        }
        let energy: T = taps.iter().map(|t| t.gain.norm_sqr()).sum();
        if !energy.is_finite() || energy <= T::zero() {
            return Err(ChannelError::BadEnergy { energy: energy.to_f64_lossy() });
        }
        Ok(Self { link, taps })
    }

    /// Sorts `taps` by delay before validating.
    pub fn from_unsorted(link: LinkId, mut taps: Vec<Tap<T>>) -> Result<Self, ChannelError> {
        taps.sort_by(|a, b| a.delay.partial_cmp(&b.delay).unwrap_or(std::cmp::Ordering::Equal));
        Self::new(link, taps)
    }

    pub fn link(&self) -> LinkId {
        self.link
    }

    pub fn taps(&self) -> &[Tap<T>] {
        &self.taps
    }

    pub fn energy(&self) -> T {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    pub fn first_arrival(&self) -> T {
        self.taps[0].delay
    }

    pub fn delay_spread(&self) -> T {
        self.taps[self.taps.len() - 1].delay - self.taps[0].delay
    }

    /// Returns the bulk propagation delay and a copy whose first tap sits at zero delay.
    ///
    /// A receiver synchronised to the first arrival only sees the excess delays;
    /// the bulk delay difference between nodes is carried by the time gap instead.
    pub fn split_bulk_delay(&self) -> (T, Self) {
        let bulk = self.first_arrival();
        let taps = self.taps.iter().map(|t| Tap { delay: t.delay - bulk, gain: t.gain }).collect();
        (bulk, Self { link: self.link, taps })
    }

    /// Multiplies every gain by `factor`.
    pub fn scaled(&self, factor: Complex<T>) -> Self {
        let taps = self.taps.iter().map(|t| Tap { delay: t.delay, gain: t.gain * factor }).collect();
        Self { link: self.link, taps }
    }
}
