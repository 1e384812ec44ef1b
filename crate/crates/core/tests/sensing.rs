use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwacr::chanmodel::DiscreteChannel;
use uwacr::oracle::{compute_cqi, BeaconSpec, DEFAULT_SINGULAR_FLOOR};
use uwacr::phy::{build_circulant, synthesize_received, DataSymbol, InterfererSpec, OfdmConfig, OfdmPhy};
use uwacr::sensing::{beacon_cqi, energy_detect, observe_spectrum, SensingConfig};

fn phy() -> OfdmPhy<f64> {
    OfdmPhy::new(OfdmConfig::default()).unwrap()
}

fn channel(len: usize, rng: &mut ChaCha8Rng) -> DiscreteChannel<f64> {
    let taps = (0..len)
        .map(|i| Complex::from_polar(if i == 0 { 1.0 } else { rng.random_range(0.05..0.6) }, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    DiscreteChannel::new(taps, phy().sample_period()).unwrap()
}

fn interferer(p: &OfdmPhy<f64>, rb: usize, gap: isize, power: f64, rng: &mut ChaCha8Rng) -> InterfererSpec<f64> {
    let mut spec = InterfererSpec::new(1, channel(20, rng), gap, p.rb_map().bins(rb).collect(), power);
    spec.draw_data(p, rng).unwrap();
    spec
}

fn beacon_window(
    p: &OfdmPhy<f64>,
    h: &DiscreteChannel<f64>,
    beacon: &BeaconSpec<f64>,
    others: &[InterfererSpec<f64>],
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex<f64>> {
    synthesize_received(p, h, &beacon.symbol(), others, noise, rng).unwrap().y()
}

fn sensed(p: &OfdmPhy<f64>, others: &[InterfererSpec<f64>], noise: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let h = DiscreteChannel::identity(p.sample_period());
    let y = synthesize_received(p, &h, &DataSymbol::zeros(p.n_fft()), others, noise, rng).unwrap().y();
    observe_spectrum(p, &y, &SensingConfig::default()).unwrap()
}

#[test]
fn noiseless_beacon_reproduces_oracle_cqi() {
    let p = phy();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let beacon = BeaconSpec::full_band(&p, 4, 1.0);
    for _ in 0..5 {
        let h = channel(30, &mut rng);
        let y = beacon_window(&p, &h, &beacon, &[], 0.0, &mut rng);
        let est = beacon_cqi(&p, &y, &beacon, 0.3).unwrap();
        let exact = compute_cqi(&p, &beacon, &build_circulant(&p, &h).unwrap(), 0.3, DEFAULT_SINGULAR_FLOOR).unwrap();
        for (a, b) in est.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn doubling_noise_halves_cqi_at_high_snr() {
    let p = phy();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let beacon = BeaconSpec::full_band(&p, 4, 1.0);
    let h = channel(30, &mut rng);
    let mean_cqi = |noise: f64, rng: &mut ChaCha8Rng| {
        let mut acc = vec![0.0; p.rb_map().n_rb()];
        for _ in 0..1000 {
            let y = beacon_window(&p, &h, &beacon, &[], noise, rng);
            for (a, c) in acc.iter_mut().zip(beacon_cqi(&p, &y, &beacon, noise).unwrap()) {
                *a += c / 1000.0;
            }
        }
        acc
    };
    let one = mean_cqi(1e-3, &mut rng);
    let two = mean_cqi(2e-3, &mut rng);
    for (a, b) in one.iter().zip(&two) {
        assert!((b / a - 0.5).abs() <= 0.05, "ratio {}", b / a);
    }
}

#[test]
fn interference_during_beacon_biases_cqi() {
    let p = phy();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let beacon = BeaconSpec::full_band(&p, 4, 1.0);
    let h = channel(30, &mut rng);
    let noise = 0.1;
    let exact = compute_cqi(&p, &beacon, &build_circulant(&p, &h).unwrap(), noise, DEFAULT_SINGULAR_FLOOR).unwrap();
    let trials = 1000;
    let (mut clean, mut dirty) = (vec![0.0; 5], vec![0.0; 5]);
    for _ in 0..trials {
        let y = beacon_window(&p, &h, &beacon, &[], noise, &mut rng);
        for (a, c) in clean.iter_mut().zip(beacon_cqi(&p, &y, &beacon, noise).unwrap()) {
            *a += c / trials as f64;
        }
        let spec = interferer(&p, 1, 77, 1.0, &mut rng);
        let y = beacon_window(&p, &h, &beacon, &[spec], noise, &mut rng);
        for (a, c) in dirty.iter_mut().zip(beacon_cqi(&p, &y, &beacon, noise).unwrap()) {
            *a += c / trials as f64;
        }
    }
    // without interference the estimate carries only the +1 noise bias
    assert!((clean[2] - (exact[2] + 1.0)).abs() < 0.05 * exact[2]);
    for rb in [0, 1, 2] {
        assert!(dirty[rb] > clean[rb] * 1.02, "rb {rb}: {} vs {}", dirty[rb], clean[rb]);
        assert!(dirty[rb] != exact[rb]);
    }
}

#[test]
fn single_active_rb_concentrates_energy() {
    let p = phy();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let first = SensingConfig::default().kept_bins(p.n_fft()).start;
    for gap in [0isize, 13, -90, 150] {
        let spec = interferer(&p, 2, gap, 100.0, &mut rng);
        let s = sensed(&p, &[spec], 1e-3, &mut rng);
        let total: f64 = s.iter().map(|[a, b]| a * a + b * b).sum();
        let on_rb: f64 = p.rb_map().bins(2).map(|k| s[k - first]).map(|[a, b]| a * a + b * b).sum();
        assert!(on_rb >= 0.9 * total, "gap {gap}: {}", on_rb / total);
        let energy = energy_detect(&s, p.rb_map(), first);
        assert!((0..5).filter(|rb| *rb != 2).all(|rb| energy[rb] < energy[2]));
    }
}

#[test]
fn kept_spectrum_obeys_parseval() {
    let p = phy();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let specs = [interferer(&p, 0, rng.random_range(-200i64..200) as isize, 3.0, &mut rng), interferer(&p, 4, 0, 1.0, &mut rng)];
        let h = DiscreteChannel::identity(p.sample_period());
        let y = synthesize_received(&p, &h, &DataSymbol::zeros(p.n_fft()), &specs, 0.5, &mut rng).unwrap().y();
        let s = observe_spectrum(&p, &y, &SensingConfig::default()).unwrap();
        let kept: f64 = s.iter().map(|[a, b]| a * a + b * b).sum();
        let time: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        assert!(kept <= time * (1.0 + 1e-12));
    }
}

#[test]
fn adjacent_leakage_grows_with_interferer_power() {
    let p = phy();
    let first = SensingConfig::default().kept_bins(p.n_fft()).start;
    let leak = |power: f64, noise: f64, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = interferer(&p, 1, 45, power, &mut rng);
        energy_detect(&sensed(&p, &[spec], noise, &mut rng), p.rb_map(), first)[2]
    };
    let grid = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0];
    let values: Vec<f64> = grid.iter().map(|&pw| leak(pw, 0.0, 9)).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");

    // averaged over draws the free RB sits above the noise-only floor
    let noise = 0.1;
    let with: f64 = (0..300).map(|s| leak(1.0, noise, 100 + s)).sum::<f64>() / 300.0;
    let without: f64 = (0..300).map(|s| leak(0.0, noise, 100 + s)).sum::<f64>() / 300.0;
    assert!(with > 1.1 * without, "{with} vs {without}");
}
