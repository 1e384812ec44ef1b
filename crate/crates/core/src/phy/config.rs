use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::PhyError;

/// OFDM numerology. Defaults follow the reference deployment: 256-point FFT,
/// 128 ms symbols, 30 ms cyclic prefix, five resource blocks of ten subcarriers.
///
/// Signals are simulated in complex baseband with sample period
/// `symbol_duration / n_fft`; `passband_sample_period` is kept for reference only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_fft: usize,
    /// Seconds, excluding the cyclic prefix.
    pub symbol_duration: f64,
    pub cp_duration: f64,
    pub n_rb: usize,
    pub subcarriers_per_rb: usize,
    pub carrier_hz: f64,
    pub passband_sample_period: f64,
    /// OFDM symbols per packet.
    pub symbols_per_packet: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_fft: 256,
            symbol_duration: 0.128,
            cp_duration: 0.030,
            n_rb: 5,
            subcarriers_per_rb: 10,
            carrier_hz: 1200.0,
            passband_sample_period: 45.455e-6,
            symbols_per_packet: 4,
        }
    }
}

impl OfdmConfig {
    /// Numerology given directly in samples at a 0.5 ms sample period.
    pub fn with_samples(n_fft: usize, cp_len: usize, n_rb: usize, subcarriers_per_rb: usize) -> Self {
        let ts = 0.128 / 256.0;
        Self { n_fft, symbol_duration: n_fft as f64 * ts, cp_duration: cp_len as f64 * ts, n_rb, subcarriers_per_rb, ..Self::default() }
    }

    pub fn sample_period(&self) -> f64 {
        self.symbol_duration / self.n_fft as f64
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        1.0 / self.symbol_duration
    }

    pub fn cp_len(&self) -> usize {
        (self.cp_duration / self.sample_period()).round() as usize
    }

    pub fn occupied_bins(&self) -> usize {
        self.n_rb * self.subcarriers_per_rb
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        let bad = |msg: String| Err(PhyError::InvalidConfig(msg));
        if self.n_fft < 2 {
            return bad(format!("n_fft must be at least 2, got {}", self.n_fft));
        }
        if self.n_rb == 0 || self.subcarriers_per_rb == 0 {
            return bad("n_rb and subcarriers_per_rb must be positive".into());
        }
        if self.occupied_bins() > self.n_fft {
            return bad(format!("{} RBs x {} subcarriers exceed n_fft {}", self.n_rb, self.subcarriers_per_rb, self.n_fft));
        }
        for (name, v) in [
            ("symbol_duration", self.symbol_duration),
            ("cp_duration", self.cp_duration),
            ("carrier_hz", self.carrier_hz),
            ("passband_sample_period", self.passband_sample_period),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.symbols_per_packet == 0 {
            return bad("symbols_per_packet must be positive".into());
        }
        if self.cp_len() == 0 || self.cp_len() >= self.n_fft {
            return bad(format!("cyclic prefix of {} samples must lie in 1..n_fft", self.cp_len()));
        }
        Ok(())
    }

    /// Contiguous RB blocks centred in the FFT grid; the band centre sits at bin `n_fft / 2`.
    pub fn rb_map(&self) -> RbMap {
        let first = (self.n_fft - self.occupied_bins()) / 2;
        let blocks = (0..self.n_rb)
            .map(|i| {
                let start = first + i * self.subcarriers_per_rb;
                start..start + self.subcarriers_per_rb
            })
            .collect();
        RbMap { blocks }
    }
}

/// Subcarrier index sets of each resource block; pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbMap {
    blocks: Vec<Range<usize>>,
}

impl RbMap {
    pub fn from_blocks(blocks: Vec<Range<usize>>) -> Self {
        Self { blocks }
    }

    pub fn n_rb(&self) -> usize {
        self.blocks.len()
    }

    pub fn bins(&self, rb: usize) -> Range<usize> {
        self.blocks[rb].clone()
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    /// Every occupied bin, ascending.
    pub fn all_bins(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|b| b.clone()).collect()
    }

    pub fn rb_of(&self, bin: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&bin))
    }

    pub fn band(&self) -> Range<usize> {
        let lo = self.blocks.iter().map(|b| b.start).min().unwrap_or(0);
        let hi = self.blocks.iter().map(|b| b.end).max().unwrap_or(0);
        lo..hi
    }
}
