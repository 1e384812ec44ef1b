use num_complex::Complex;
use rand::Rng;

use super::{build_circulant, build_windowed_toeplitz, complex_gaussian, zeros, DataSymbol, OfdmPhy, PhyError, SampleStream};
use crate::chanmodel::DiscreteChannel;
use crate::Real;

/// One asynchronous interferer as seen in the victim's FFT window.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfererSpec<T> {
    pub node: usize,
    pub channel: DiscreteChannel<T>,
    /// Time gap in samples; victim-frame sample `n` meets interferer sample `n + gap`.
    pub gap: isize,
    pub allocation: Vec<usize>,
    /// Per-subcarrier transmit power.
    pub power: T,
    /// Data of the symbols overlapping the window, in order from
    /// [`InterfererSpec::symbol_range`]`.0`. Empty when only statistics are needed.
    pub symbols: Vec<DataSymbol<T>>,
}

fn floor_div(a: isize, b: isize) -> isize {
    a.div_euclid(b)
}

impl<T: Real> InterfererSpec<T> {
    pub fn new(node: usize, channel: DiscreteChannel<T>, gap: isize, allocation: Vec<usize>, power: T) -> Self {
        Self { node, channel, gap, allocation, power, symbols: Vec::new() }
    }

    /// Whether any of this interferer's samples reach the victim window.
    pub fn overlaps(&self, phy: &OfdmPhy<T>) -> bool {
        self.gap.unsigned_abs() < phy.symbol_len()
    }

    /// Inclusive range of interferer symbol indices the window touches (channel memory included).
    pub fn symbol_range(&self, phy: &OfdmPhy<T>) -> (isize, isize) {
        let ls = phy.symbol_len() as isize;
        let start = phy.cp_len() as isize + self.gap;
        let lo = floor_div(start - (self.channel.len() as isize - 1), ls);
        let hi = floor_div(start + phy.n_fft() as isize - 1, ls);
        (lo, hi)
    }

    pub fn n_symbols(&self, phy: &OfdmPhy<T>) -> usize {
        let (lo, hi) = self.symbol_range(phy);
        (hi - lo + 1) as usize
    }

    /// Draws fresh Gaussian data for every overlapping symbol.
    pub fn draw_data<R: Rng + ?Sized>(&mut self, phy: &OfdmPhy<T>, rng: &mut R) -> Result<(), PhyError> {
        let n = self.n_symbols(phy);
        self.symbols = (0..n).map(|_| DataSymbol::random(phy.n_fft(), &self.allocation, self.power, rng)).collect::<Result<_, _>>()?;
        Ok(())
    }

    pub fn stream(&self, phy: &OfdmPhy<T>) -> Result<SampleStream<T>, PhyError> {
        let expected = self.n_symbols(phy);
        if self.symbols.len() != expected {
            return Err(PhyError::MissingData { node: self.node, expected, found: self.symbols.len() });
        }
        Ok(SampleStream::from_symbols(phy, self.symbol_range(phy).0, &self.symbols))
    }

    /// Time-domain samples this interferer adds to the victim window.
    pub fn contribution(&self, phy: &OfdmPhy<T>) -> Result<Vec<Complex<T>>, PhyError> {
        build_windowed_toeplitz(phy, &self.channel, self.gap, &self.stream(phy)?)
    }
}

/// Victim-window samples, stored as separable components.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSymbol<T> {
    pub desired: Vec<Complex<T>>,
    pub interference: Vec<Complex<T>>,
    pub noise: Vec<Complex<T>>,
}

impl<T: Real> ReceivedSymbol<T> {
    /// `desired + interference + noise`.
    pub fn y(&self) -> Vec<Complex<T>> {
        self.desired.iter().zip(&self.interference).zip(&self.noise).map(|((d, j), z)| d + j + z).collect()
    }
}

fn check_period<T: Real>(phy: &OfdmPhy<T>, h: &DiscreteChannel<T>) -> Result<(), PhyError> {
    let expected = phy.sample_period().to_f64_lossy();
    let found = h.period().to_f64_lossy();
    if (expected - found).abs() > 1e-9 * expected {
        return Err(PhyError::PeriodMismatch { expected, found });
    }
    Ok(())
}

/// Victim window: `H_s F^H d_s` plus every overlapping interferer plus white
/// circular Gaussian noise of per-sample variance `noise_var`.
///
/// Interferers whose gap exceeds a full symbol are dropped. Each interferer must
/// already carry its data (see [`InterfererSpec::draw_data`]).
pub fn synthesize_received<T: Real, R: Rng + ?Sized>(
    phy: &OfdmPhy<T>,
    desired_channel: &DiscreteChannel<T>,
    desired: &DataSymbol<T>,
    interferers: &[InterfererSpec<T>],
    noise_var: T,
    rng: &mut R,
) -> Result<ReceivedSymbol<T>, PhyError> {
    let n = phy.n_fft();
    if desired.values().len() != n {
        return Err(PhyError::LengthMismatch { expected: n, found: desired.values().len() });
    }
    check_period(phy, desired_channel)?;
    let op = build_circulant(phy, desired_channel)?;
    let desired_samples = op.apply(phy, &desired.time_samples(phy))?;

    let mut interference = zeros(n);
    for spec in interferers.iter().filter(|s| s.overlaps(phy)) {
        check_period(phy, &spec.channel)?;
        for (acc, v) in interference.iter_mut().zip(spec.contribution(phy)?) {
            *acc += v;
        }
    }

    let noise = if noise_var > T::zero() { (0..n).map(|_| complex_gaussian(noise_var, rng)).collect() } else { zeros(n) };
    Ok(ReceivedSymbol { desired: desired_samples, interference, noise })
}
