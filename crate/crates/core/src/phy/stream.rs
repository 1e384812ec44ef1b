use num_complex::Complex;
use rand::Rng;

use super::{complex_gaussian, zeros, OfdmPhy, PhyError};
use crate::chanmodel::DiscreteChannel;
use crate::Real;

/// Frequency-domain data vector of one OFDM symbol; zero outside `allocation`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSymbol<T> {
    values: Vec<Complex<T>>,
    allocation: Vec<usize>,
    /// `E|d[k]|^2` on allocated bins.
    power: T,
}

impl<T: Real> DataSymbol<T> {
    pub fn new(values: Vec<Complex<T>>, allocation: Vec<usize>, power: T) -> Result<Self, PhyError> {
        let n = values.len();
        if let Some(&bin) = allocation.iter().find(|&&k| k >= n) {
            return Err(PhyError::BinOutOfRange { bin, n_fft: n });
        }
        let mut allowed = vec![false; n];
        allocation.iter().for_each(|&k| allowed[k] = true);
        let mut values = values;
        for (k, v) in values.iter_mut().enumerate() {
            if !allowed[k] {
                *v = Complex::new(T::zero(), T::zero());
            }
        }
        Ok(Self { values, allocation, power })
    }

    /// Unit-variance circular Gaussian entries scaled to `power` on `allocation`.
    pub fn random<R: Rng + ?Sized>(n_fft: usize, allocation: &[usize], power: T, rng: &mut R) -> Result<Self, PhyError> {
        let mut values = zeros(n_fft);
        for &k in allocation {
            if k >= n_fft {
                return Err(PhyError::BinOutOfRange { bin: k, n_fft });
            }
            values[k] = complex_gaussian(power, rng);
        }
        Ok(Self { values, allocation: allocation.to_vec(), power })
    }

    pub fn zeros(n_fft: usize) -> Self {
        Self { values: zeros(n_fft), allocation: Vec::new(), power: T::zero() }
    }

    /// Single subcarrier `bin` carrying `value`.
    pub fn tone(n_fft: usize, bin: usize, value: Complex<T>) -> Self {
        let mut values = zeros(n_fft);
        values[bin] = value;
        Self { values, allocation: vec![bin], power: value.norm_sqr() }
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn allocation(&self) -> &[usize] {
        &self.allocation
    }

    pub fn power(&self) -> T {
        self.power
    }

    /// Time-domain body `F^H d`, without cyclic prefix.
    pub fn time_samples(&self, phy: &OfdmPhy<T>) -> Vec<Complex<T>> {
        phy.dft().inverse(&self.values)
    }
}

/// Contiguous run of complex samples starting at index `first` of some timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream<T> {
    first: isize,
    samples: Vec<Complex<T>>,
}

impl<T: Real> SampleStream<T> {
    pub fn new(first: isize, samples: Vec<Complex<T>>) -> Self {
        Self { first, samples }
    }

    /// CP-prefixed concatenation of `symbols`; symbol `m` starts at `m * (n_fft + cp)`.
    pub fn from_symbols(phy: &OfdmPhy<T>, first_symbol: isize, symbols: &[DataSymbol<T>]) -> Self {
        let n = phy.n_fft();
        let cp = phy.cp_len();
        let mut samples = Vec::with_capacity(symbols.len() * phy.symbol_len());
        for s in symbols {
            let body = s.time_samples(phy);
            samples.extend_from_slice(&body[n - cp..]);
            samples.extend_from_slice(&body);
        }
        Self { first: first_symbol * phy.symbol_len() as isize, samples }
    }

    pub fn first(&self) -> isize {
        self.first
    }

    /// Index one past the last sample.
    pub fn end(&self) -> isize {
        self.first + self.samples.len() as isize
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn get(&self, index: isize) -> Option<Complex<T>> {
        let offset = index - self.first;
        if offset < 0 {
            return None;
        }
        self.samples.get(offset as usize).copied()
    }
}

/// Interferer contribution inside the victim's FFT window.
///
/// The stream (interferer-local time, CPs included) is linearly convolved with `h`
/// and sampled at victim-window positions `cp + i`, i.e. interferer-local indices
/// `cp + gap + i`. The Toeplitz matrix is never formed.
pub fn build_windowed_toeplitz<T: Real>(
    phy: &OfdmPhy<T>,
    h: &DiscreteChannel<T>,
    gap: isize,
    stream: &SampleStream<T>,
) -> Result<Vec<Complex<T>>, PhyError> {
    let n = phy.n_fft() as isize;
    let start = phy.cp_len() as isize + gap;
    let needed = (start - (h.len() as isize - 1), start + n - 1);
    if needed.0 < stream.first() || needed.1 >= stream.end() {
        return Err(PhyError::WindowUnderrun { needed, have: (stream.first(), stream.end() - 1) });
    }
    let taps = h.taps();
    let x = stream.samples();
    let base = start - stream.first();
    let out = (0..n)
        .map(|i| {
            let j = (base + i) as usize;
            taps.iter().enumerate().map(|(l, hl)| *hl * x[j - l]).sum()
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{build_circulant, OfdmConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phy() -> OfdmPhy<f64> {
        OfdmPhy::new(OfdmConfig::with_samples(64, 16, 4, 8)).unwrap()
    }

    fn channel(rng: &mut ChaCha8Rng, len: usize) -> DiscreteChannel<f64> {
        let taps = (0..len).map(|_| complex_gaussian(1.0, rng)).collect();
        DiscreteChannel::new(taps, 5e-4).unwrap()
    }

    #[test]
    fn synchronous_window_equals_circular_convolution() {
        let p = phy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = channel(&mut rng, 17);
        let alloc: Vec<usize> = (16..48).collect();
        let syms: Vec<_> = (0..3).map(|_| DataSymbol::random(64, &alloc, 1.0, &mut rng).unwrap()).collect();
        let stream = SampleStream::from_symbols(&p, -1, &syms);
        let windowed = build_windowed_toeplitz(&p, &h, 0, &stream).unwrap();
        let circ = build_circulant(&p, &h).unwrap().apply(&p, &syms[1].time_samples(&p)).unwrap();
        let max_diff = windowed.iter().zip(&circ).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(max_diff <= 1e-10, "{max_diff:e}");
    }

    #[test]
    fn zero_stream_gives_zero_window() {
        let p = phy();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = channel(&mut rng, 5);
        let stream = SampleStream::new(-200, zeros(600));
        let out = build_windowed_toeplitz(&p, &h, 13, &stream).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn straddling_window_matches_sample_level_convolution() {
        let p = phy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = channel(&mut rng, 9);
        // single-tone interferer, symbols -1..=1, gap of half an FFT
        let syms: Vec<_> = (0..3).map(|_| DataSymbol::tone(64, 20, complex_gaussian(1.0, &mut rng))).collect();
        let stream = SampleStream::from_symbols(&p, -1, &syms);
        let gap = 32;
        let out = build_windowed_toeplitz(&p, &h, gap, &stream).unwrap();

        // full linear convolution over the whole stream, then cut
        let x = stream.samples();
        let full: Vec<Complex<f64>> = (0..x.len() + h.len() - 1)
            .map(|j| (0..h.len()).filter(|&l| l <= j && j - l < x.len()).map(|l| h.taps()[l] * x[j - l]).sum())
            .collect();
        let offset = (16 + gap - stream.first()) as usize;
        let oracle = &full[offset..offset + 64];
        let e_out: f64 = out.iter().map(|v| v.norm_sqr()).sum();
        let e_oracle: f64 = oracle.iter().map(|v| v.norm_sqr()).sum();
        assert!((e_out - e_oracle).abs() <= 1e-9 * e_oracle);
        assert!(out.iter().zip(oracle).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn underrun_reported() {
        let p = phy();
        let stream = SampleStream::from_symbols(&p, 0, &[DataSymbol::zeros(64)]);
        let err = build_windowed_toeplitz(&p, &DiscreteChannel::identity(5e-4), 20, &stream).unwrap_err();
        assert!(matches!(err, PhyError::WindowUnderrun { .. }));
    }

    #[test]
    fn data_symbol_support_is_allocation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = DataSymbol::<f64>::random(64, &[3, 9], 2.0, &mut rng).unwrap();
        for (k, v) in d.values().iter().enumerate() {
            assert_eq!(v.norm() > 0.0, k == 3 || k == 9);
        }
        let masked = DataSymbol::new(vec![Complex::new(1.0, 0.0); 8], vec![2], 1.0).unwrap();
        assert_eq!(masked.values().iter().filter(|v| v.norm() > 0.0).count(), 1);
    }
}
