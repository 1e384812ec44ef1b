//! Closed-form SINR against time-domain Monte Carlo on a small asynchronous scene.

use std::io::Write;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwacr::chanmodel::DiscreteChannel;
use uwacr::oracle::{montecarlo_sinr, subcarrier_sinr, OracleError, DEFAULT_SINGULAR_FLOOR};
use uwacr::phy::{build_circulant, InterfererSpec, OfdmConfig, OfdmPhy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrCheckRow {
    pub bin: usize,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrCheck {
    pub gaps: Vec<isize>,
    pub rows: Vec<SinrCheckRow>,
    pub trials: usize,
}

impl SinrCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }
}

fn channel(len: usize, period: f64, rng: &mut ChaCha8Rng) -> DiscreteChannel<f64> {
    let mut taps: Vec<Complex<f64>> =
        (0..len).map(|_| Complex::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..std::f64::consts::TAU))).collect();
    taps[0] = Complex::new(1.0, 0.0);
    DiscreteChannel::new(taps, period).expect("the OFDM sample period is positive")
}

/// N = 64, four RBs of eight bins; the victim holds RB 1 and two interferers with
/// random gaps hold RBs 0 and 2.
pub fn sinr_check(seed: u64, trials: usize) -> Result<SinrCheck, OracleError> {
    let phy = OfdmPhy::<f64>::new(OfdmConfig::with_samples(64, 16, 4, 8))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts = phy.sample_period();
    let map = phy.rb_map().clone();
    let limit = phy.symbol_len() as i64 - 1;
    let victim = channel(6, ts, &mut rng);
    let gaps: Vec<isize> = (0..2).map(|_| rng.random_range(-limit..=limit) as isize).collect();
    let specs = vec![
        InterfererSpec::new(1, channel(9, ts, &mut rng), gaps[0], map.bins(0).collect(), 0.8),
        InterfererSpec::new(2, channel(12, ts, &mut rng), gaps[1], map.bins(2).collect(), 1.5),
    ];
    let allocation: Vec<usize> = map.bins(1).collect();
    let noise_var = 0.05;
    let mc = montecarlo_sinr(&phy, &victim, &allocation, &specs, 1.0, noise_var, trials, seed)?;
    let op = build_circulant(&phy, &victim)?;
    let rows = allocation
        .iter()
        .zip(&mc.sinr)
        .map(|(&bin, &sampled)| {
            let exact = subcarrier_sinr(&phy, bin, &op, &specs, noise_var, 1.0, DEFAULT_SINGULAR_FLOOR)?;
            Ok(SinrCheckRow { bin, closed_form: exact, monte_carlo: sampled, rel_error: (sampled - exact).abs() / exact })
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    Ok(SinrCheck { gaps, rows, trials })
}

/// `bin,closed_form,monte_carlo,rel_error,config_sha256`.
pub fn write_sinr_check<W: Write>(out: W, check: &SinrCheck, fingerprint: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "closed_form", "monte_carlo", "rel_error", "config_sha256"])?;
    for r in &check.rows {
        w.write_record([
            r.bin.to_string(),
            r.closed_form.to_string(),
            r.monte_carlo.to_string(),
            r.rel_error.to_string(),
            fingerprint.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
