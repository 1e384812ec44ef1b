//! The agent's view of the channel: a beacon-derived CQI vector and a truncated
//! complex spectrum split into real and imaginary columns, plus per-RB energy
//! detection for the ED baseline.

use std::io::{self, Write};
use std::ops::Range;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::BeaconSpec;
use crate::phy::{OfdmPhy, RbMap};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("sensing needs {needed} samples, got {have}")]
    InsufficientSamples { needed: usize, have: usize },
    #[error("n_sens = {n_sens} must be positive and at most n_fft = {n_fft}")]
    BadWidth { n_sens: usize, n_fft: usize },
    #[error("sensing bins {kept:?} do not cover the occupied band {band:?}")]
    BandNotCovered { kept: Range<usize>, band: Range<usize> },
    #[error("segments must be at least 1")]
    NoSegments,
    #[error("beacon window has {found} samples, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no pilot on any bin of RB {rb}")]
    MissingPilot { rb: usize },
    #[error("spectrum has {found} rows, expected {expected}")]
    SpectrumShape { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rect,
    Hann,
}

impl Window {
    pub fn coefficient(self, n: usize, len: usize) -> f64 {
        match self {
            Window::Rect => 1.0,
            Window::Hann => 0.5 * (1.0 - (std::f64::consts::TAU * n as f64 / len as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    pub n_sens: usize,
    pub window: Window,
    /// Consecutive `n_fft`-sample segments combined into one spectrum.
    pub segments: usize,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self { n_sens: 128, window: Window::Rect, segments: 1 }
    }
}

impl SensingConfig {
    /// Bins kept in the spectrum matrix: `n_sens` bins centred on `n_fft / 2`,
    /// where the carrier's baseband image sits.
    pub fn kept_bins(&self, n_fft: usize) -> Range<usize> {
        let start = (n_fft / 2).saturating_sub(self.n_sens / 2);
        start..start + self.n_sens
    }

    pub fn validate(&self, rb_map: &RbMap, n_fft: usize) -> Result<(), SensingError> {
        if self.n_sens == 0 || self.n_sens > n_fft {
            return Err(SensingError::BadWidth { n_sens: self.n_sens, n_fft });
        }
        if self.segments == 0 {
            return Err(SensingError::NoSegments);
        }
        let kept = self.kept_bins(n_fft);
        let band = rb_map.band();
        if band.start < kept.start || band.end > kept.end {
            return Err(SensingError::BandNotCovered { kept, band });
        }
        Ok(())
    }
}

/// One state `S_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub cqi: Vec<T>,
    /// `n_sens` rows of `[re, im]`.
    pub spectrum: Vec<[T; 2]>,
}

impl<T: Real> Observation<T> {
    pub fn n_rb(&self) -> usize {
        self.cqi.len()
    }

    pub fn n_sens(&self) -> usize {
        self.spectrum.len()
    }
}

/// Windowed unitary DFT of the sensed samples, truncated to the kept bins.
///
/// With several segments the per-segment spectra are summed and scaled by
/// `1/sqrt(segments)`, which keeps white-noise bins at unit gain. Extra samples
/// past the last full segment are ignored.
pub fn observe_spectrum<T: Real>(phy: &OfdmPhy<T>, samples: &[Complex<T>], config: &SensingConfig) -> Result<Vec<[T; 2]>, SensingError> {
    let n = phy.n_fft();
    config.validate(phy.rb_map(), n)?;
    let needed = n * config.segments;
    if samples.len() < needed {
        return Err(SensingError::InsufficientSamples { needed, have: samples.len() });
    }
    let window: Vec<T> = (0..n).map(|i| T::lit(config.window.coefficient(i, n))).collect();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for seg in samples[..needed].chunks_exact(n) {
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = x * *w;
        }
        phy.dft().forward_in_place(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let scale = T::one() / T::from_usize_lossy(config.segments).sqrt();
    Ok(config.kept_bins(n).map(|k| [acc[k].re * scale, acc[k].im * scale]).collect())
}

/// Per-RB mean of the least-squares SNR estimate `|p_k|^2 |Y_k / p_k|^2 / sigma^2`
/// over the beacon bins, which is simply `|Y_k|^2 / sigma^2`. No noise-bias
/// correction is applied, so a noiseless, interference-free beacon reproduces
/// the oracle CQI exactly.
pub fn beacon_cqi<T: Real>(phy: &OfdmPhy<T>, window: &[Complex<T>], beacon: &BeaconSpec<T>, noise_var: T) -> Result<Vec<T>, SensingError> {
    let n = phy.n_fft();
    if window.len() != n {
        return Err(SensingError::LengthMismatch { expected: n, found: window.len() });
    }
    let spectrum = phy.dft().forward(window);
    let map = phy.rb_map();
    (0..map.n_rb())
        .map(|rb| {
            let mut sum = T::zero();
            let mut count = 0usize;
            for k in beacon.rb_bins(map, rb) {
                let p = beacon.pilots()[k];
                let h = spectrum[k] / p;
                sum += (p.norm_sqr() * h.norm_sqr() / noise_var).abs();
                count += 1;
            }
            if count == 0 {
                return Err(SensingError::MissingPilot { rb });
            }
            Ok(sum / T::from_usize_lossy(count))
        })
        .collect()
}

/// Per-RB mean of `re^2 + im^2` over the RB's bins. `first_bin` is the DFT bin
/// of spectrum row 0; RB bins outside the kept range are skipped.
pub fn energy_detect<T: Real>(spectrum: &[[T; 2]], rb_map: &RbMap, first_bin: usize) -> Vec<T> {
    (0..rb_map.n_rb())
        .map(|rb| {
            let mut sum = T::zero();
            let mut count = 0usize;
            for k in rb_map.bins(rb) {
                if let Some([re, im]) = k.checked_sub(first_bin).and_then(|i| spectrum.get(i)) {
                    sum += *re * *re + *im * *im;
                    count += 1;
                }
            }
            if count == 0 {
                T::zero()
            } else {
                sum / T::from_usize_lossy(count)
            }
        })
        .collect()
}

/// Writes `bin,re,im` rows with a header.
pub fn write_spectrum_csv<T: Real, W: Write>(out: &mut W, spectrum: &[[T; 2]], first_bin: usize) -> io::Result<()> {
    writeln!(out, "bin,re,im")?;
    for (i, [re, im]) in spectrum.iter().enumerate() {
        writeln!(out, "{},{:e},{:e}", first_bin + i, re, im)?;
    }
    Ok(())
}
