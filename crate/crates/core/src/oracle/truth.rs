use super::sinr::{sinr_report, total_interference_psd};
use super::OracleError;
use crate::phy::{CirculantOperator, InterfererSpec, OfdmPhy, RbMap};
use crate::Real;

/// What the simulator knows: which RBs are free and what each would carry.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    pub available: Vec<bool>,
    /// Zero on occupied RBs.
    pub rates: Vec<T>,
}

impl<T: Real> GroundTruth<T> {
    /// `v_RB` as 0/1 reals.
    pub fn v_rb(&self) -> Vec<T> {
        self.available.iter().map(|&a| if a { T::one() } else { T::zero() }).collect()
    }

    pub fn n_rb(&self) -> usize {
        self.available.len()
    }

    pub fn any_available(&self) -> bool {
        self.available.iter().any(|&a| a)
    }

    /// Index of the largest rate, lowest index on ties.
    pub fn best_rb(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.rates.iter().enumerate() {
            if *r > self.rates[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_rate(&self) -> T {
        self.rates[self.best_rb()]
    }
}

/// RBs touched by any interferer allocation, overlapping or not.
pub fn occupied_rbs<T>(rb_map: &RbMap, interferers: &[InterfererSpec<T>]) -> Vec<bool> {
    let mut occupied = vec![false; rb_map.n_rb()];
    for spec in interferers {
        for &k in &spec.allocation {
            if let Some(rb) = rb_map.rb_of(k) {
                occupied[rb] = true;
            }
        }
    }
    occupied
}

/// For each free RB, the packet rate of the victim transmitting there with
/// per-subcarrier `power` against the current interferers; zero on occupied RBs.
///
/// The interferer set is held fixed over the packet's symbols, so every symbol
/// sees the same interference statistics.
pub fn ground_truth<T: Real>(
    phy: &OfdmPhy<T>,
    victim: &CirculantOperator<T>,
    interferers: &[InterfererSpec<T>],
    power: T,
    noise_var: T,
    floor: T,
) -> Result<GroundTruth<T>, OracleError> {
    let map = phy.rb_map();
    let occupied = occupied_rbs(map, interferers);
    let psd = total_interference_psd(phy, interferers)?;
    let symbols = vec![psd; phy.config().symbols_per_packet.max(1)];
    let mut rates = vec![T::zero(); map.n_rb()];
    for rb in (0..map.n_rb()).filter(|&rb| !occupied[rb]) {
        let bins: Vec<usize> = map.bins(rb).collect();
        rates[rb] = sinr_report(victim, &bins, &symbols, noise_var, power, floor)?.rate;
    }
    Ok(GroundTruth { available: occupied.iter().map(|o| !o).collect(), rates })
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
    fn all_free_identity_is_symmetric() {
        let p = phy();
        let op = build_circulant(&p, &DiscreteChannel::identity(5e-4)).unwrap();
        let t = ground_truth(&p, &op, &[], 1.0, 0.1, 1e-9).unwrap();
        assert_eq!(t.available, vec![true; 4]);
        for r in &t.rates {
            assert!((r - 11f64.log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn occupied_rb_has_zero_rate() {
        let p = phy();
        let op = build_circulant(&p, &DiscreteChannel::identity(5e-4)).unwrap();
        let spec = InterfererSpec::new(1, DiscreteChannel::identity(5e-4), 0, p.rb_map().bins(2).collect(), 1.0);
        let t = ground_truth(&p, &op, &[spec], 1.0, 0.1, 1e-9).unwrap();
        assert_eq!(t.v_rb(), vec![1.0, 1.0, 0.0, 1.0]);
        assert_eq!(t.rates[2], 0.0);
        assert!(t.rates[1] > 0.0);
    }

    #[test]
    fn best_rb_breaks_ties_low() {
        let t = GroundTruth { available: vec![true; 3], rates: vec![1.0, 2.0, 2.0] };
        assert_eq!(t.best_rb(), 1);
        assert_eq!(t.max_rate(), 2.0);
    }
}
