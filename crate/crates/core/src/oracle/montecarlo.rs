use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::equalize::equalize_components;
use super::OracleError;
use crate::chanmodel::DiscreteChannel;
use crate::phy::{build_circulant, synthesize_received, DataSymbol, InterfererSpec, OfdmPhy};
use crate::Real;

/// Empirical per-bin SINR from repeated time-domain synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSinr<T> {
    pub bins: Vec<usize>,
    pub sinr: Vec<T>,
    pub trials: usize,
}

/// Draws fresh desired data, interferer data and noise `trials` times, equalizes,
/// and measures the error power `|y_eq[k] - d[k]|^2` per bin. Trials run in
/// parallel on independent ChaCha streams, so the result depends only on `seed`.
#[allow(clippy::too_many_arguments)]
pub fn montecarlo_sinr<T: Real>(
    phy: &OfdmPhy<T>,
    victim: &DiscreteChannel<T>,
    allocation: &[usize],
    interferers: &[InterfererSpec<T>],
    power: T,
    noise_var: T,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloSinr<T>, OracleError> {
    if allocation.is_empty() {
        return Err(OracleError::EmptyAllocation);
    }
    let op = build_circulant(phy, victim)?;
    let floor = T::lit(super::DEFAULT_SINGULAR_FLOOR);
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let desired = DataSymbol::random(phy.n_fft(), allocation, power, &mut rng)?;
            let mut specs = interferers.to_vec();
            for spec in specs.iter_mut() {
                spec.draw_data(phy, &mut rng)?;
            }
            let rx = synthesize_received(phy, victim, &desired, &specs, noise_var, &mut rng)?;
            let eq = equalize_components(phy, &rx, &op, allocation, floor)?;
            Ok(allocation
                .iter()
                .map(|&k| (eq.data[k] + eq.interference[k] + eq.noise[k] - desired.values()[k]).norm_sqr())
                .collect::<Vec<T>>())
        })
        .collect::<Result<Vec<_>, OracleError>>()?;

    let mut err = vec![T::zero(); allocation.len()];
    for row in &per_trial {
        for (e, v) in err.iter_mut().zip(row) {
            *e += *v;
        }
    }
    let n = T::from_usize_lossy(trials.max(1));
    let sinr = err.iter().map(|e| power / (*e / n)).collect();
    Ok(MonteCarloSinr { bins: allocation.to_vec(), sinr, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::subcarrier_sinr;
    use crate::phy::{complex_gaussian, OfdmConfig};

    fn channel(rng: &mut ChaCha8Rng, len: usize) -> DiscreteChannel<f64> {
        DiscreteChannel::new((0..len).map(|_| complex_gaussian(1.0 / len as f64, rng)).collect(), 5e-4).unwrap()
    }

    #[test]
    fn agrees_with_closed_form_for_one_interferer() {
        let p = OfdmPhy::new(OfdmConfig::with_samples(64, 16, 4, 8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = channel(&mut rng, 6);
        let spec = InterfererSpec::new(1, channel(&mut rng, 6), 27, p.rb_map().bins(2).collect(), 1.0);
        let alloc: Vec<usize> = p.rb_map().bins(1).collect();
        let mc = montecarlo_sinr(&p, &h, &alloc, std::slice::from_ref(&spec), 1.0, 0.05, 10_000, 3).unwrap();
        let op = build_circulant(&p, &h).unwrap();
        for (i, &k) in alloc.iter().enumerate() {
            let exact = subcarrier_sinr(&p, k, &op, std::slice::from_ref(&spec), 0.05, 1.0, 1e-9).unwrap();
            assert!((mc.sinr[i] - exact).abs() <= 0.05 * exact, "bin {k}: {} vs {exact}", mc.sinr[i]);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = OfdmPhy::new(OfdmConfig::with_samples(32, 8, 2, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = channel(&mut rng, 3);
        let spec = InterfererSpec::new(1, channel(&mut rng, 3), -9, p.rb_map().bins(0).collect(), 1.0);
        let alloc: Vec<usize> = p.rb_map().bins(1).collect();
        let a = montecarlo_sinr(&p, &h, &alloc, std::slice::from_ref(&spec), 1.0, 0.1, 200, 5).unwrap();
        let b = montecarlo_sinr(&p, &h, &alloc, &[spec], 1.0, 0.1, 200, 5).unwrap();
        assert_eq!(a, b);
    }
}
