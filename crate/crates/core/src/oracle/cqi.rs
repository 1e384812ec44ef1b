use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::equalize::check_bins;
use super::OracleError;
use crate::phy::{zeros, CirculantOperator, DataSymbol, OfdmPhy, PhyError, RbMap};
use crate::Real;

/// The sink's beacon: known pilots on a set of bins that touches every RB.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconSpec<T> {
    bins: Vec<usize>,
    /// Length `n_fft`; zero off `bins`.
    pilots: Vec<Complex<T>>,
    /// Beacon repetition period in seconds.
    pub period: f64,
}

impl<T: Real> BeaconSpec<T> {
    pub fn new(rb_map: &RbMap, n_fft: usize, bins: Vec<usize>, pilot_values: Vec<Complex<T>>, period: f64) -> Result<Self, OracleError> {
        if bins.len() != pilot_values.len() {
            return Err(PhyError::LengthMismatch { expected: bins.len(), found: pilot_values.len() }.into());
        }
        let mut pilots = zeros(n_fft);
        for (&k, &p) in bins.iter().zip(&pilot_values) {
            if k >= n_fft {
                return Err(PhyError::BinOutOfRange { bin: k, n_fft }.into());
            }
            if p.norm_sqr() == T::zero() {
                return Err(OracleError::MissingPilot { bin: k });
            }
            pilots[k] = p;
        }
        for rb in 0..rb_map.n_rb() {
            if !rb_map.bins(rb).any(|k| pilots[k].norm_sqr() > T::zero()) {
                return Err(OracleError::BeaconCoverage { rb });
            }
        }
        Ok(Self { bins, pilots, period })
    }

    /// Unit-modulus QPSK pilots on every RB bin.
    pub fn full_band(phy: &OfdmPhy<T>, seed: u64, period: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bins = phy.rb_map().all_bins();
        let h = T::FRAC_1_SQRT_2();
        let values = bins
            .iter()
            .map(|_| {
                let re = if rng.random::<bool>() { h } else { -h };
                let im = if rng.random::<bool>() { h } else { -h };
                Complex::new(re, im)
            })
            .collect();
        Self::new(phy.rb_map(), phy.n_fft(), bins, values, period).expect("RB map bins are in range")
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn pilots(&self) -> &[Complex<T>] {
        &self.pilots
    }

    /// Beacon bins falling in `rb`.
    pub fn rb_bins<'a>(&'a self, rb_map: &'a RbMap, rb: usize) -> impl Iterator<Item = usize> + 'a {
        rb_map.bins(rb).filter(move |&k| self.pilots[k].norm_sqr() > T::zero())
    }

    /// The beacon as a transmitted OFDM symbol.
    pub fn symbol(&self) -> DataSymbol<T> {
        let power = self.bins.iter().map(|&k| self.pilots[k].norm_sqr()).sum::<T>() / T::from_usize_lossy(self.bins.len());
        DataSymbol::new(self.pilots.clone(), self.bins.clone(), power).expect("pilots are zero off the beacon bins")
    }
}

/// Per-RB CQI: the mean over the RB's beacon bins of `|p_k|^2 |D_k|^2 / sigma^2`.
/// Interference does not enter.
pub fn compute_cqi<T: Real>(
    phy: &OfdmPhy<T>,
    beacon: &BeaconSpec<T>,
    op: &CirculantOperator<T>,
    noise_var: T,
    floor: T,
) -> Result<Vec<T>, OracleError> {
    let map = phy.rb_map();
    check_bins(op, beacon.bins(), floor)?;
    (0..map.n_rb())
        .map(|rb| {
            let mut sum = T::zero();
            let mut count = 0usize;
            for k in beacon.rb_bins(map, rb) {
                sum += beacon.pilots()[k].norm_sqr() * op.eigenvalues()[k].norm_sqr() / noise_var;
                count += 1;
            }
            if count == 0 {
                return Err(OracleError::BeaconCoverage { rb });
            }
            Ok(sum / T::from_usize_lossy(count))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanmodel::DiscreteChannel;
    use crate::phy::{build_circulant, OfdmConfig};

    fn phy() -> OfdmPhy<f64> {
        OfdmPhy::new(OfdmConfig::with_samples(64, 16, 4, 8)).unwrap()
    }

    #[test]
    fn identity_channel_cqi() {
        let p = phy();
        let beacon = BeaconSpec::full_band(&p, 1, 1.0);
        let op = build_circulant(&p, &DiscreteChannel::identity(5e-4)).unwrap();
        let cqi = compute_cqi(&p, &beacon, &op, 0.5, 1e-9).unwrap();
        assert_eq!(cqi.len(), 4);
        for c in cqi {
            assert!((c - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beacon_must_cover_every_rb() {
        let p = phy();
        let bins: Vec<usize> = p.rb_map().bins(0).collect();
        let values = vec![Complex::new(1.0, 0.0); bins.len()];
        assert_eq!(BeaconSpec::new(p.rb_map(), 64, bins, values, 1.0), Err(OracleError::BeaconCoverage { rb: 1 }));
    }

    #[test]
    fn singular_beacon_bin_is_reported() {
        let p = phy();
        let beacon = BeaconSpec::full_band(&p, 1, 1.0);
        let h = DiscreteChannel::new(vec![Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)], 5e-4).unwrap();
        let op = build_circulant(&p, &h).unwrap();
        assert!(matches!(compute_cqi(&p, &beacon, &op, 0.5, 1e-9), Err(OracleError::Singular { bin: 32, .. })));
    }
}
