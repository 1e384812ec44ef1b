use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwacr::baselines::shannon_rate;
use uwacr::chanmodel::DiscreteChannel;
use uwacr::env::{CrEnv, EnvConfig};
use uwacr::oracle::{interference_psd, montecarlo_sinr, subcarrier_sinr, DEFAULT_SINGULAR_FLOOR};
use uwacr::phy::{build_circulant, synthesize_received, DataSymbol, InterfererSpec, OfdmConfig, OfdmPhy};

fn random_channel(len: usize, period: f64, rng: &mut ChaCha8Rng) -> DiscreteChannel<f64> {
    let mut taps: Vec<Complex<f64>> =
        (0..len).map(|_| Complex::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..std::f64::consts::TAU))).collect();
    taps[0] = Complex::new(1.0, 0.0);
    DiscreteChannel::new(taps, period).unwrap()
}

#[test]
fn synchronous_disjoint_rbs_are_orthogonal() {
    let phy = OfdmPhy::<f64>::new(OfdmConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ts = phy.sample_period();
    let map = phy.rb_map().clone();
    for _ in 0..10 {
        let victim = random_channel(phy.cp_len() + 1, ts, &mut rng);
        let own: Vec<usize> = map.bins(1).collect();
        let desired = DataSymbol::random(phy.n_fft(), &own, 1.0, &mut rng).unwrap();
        let mut specs = vec![
            InterfererSpec::new(1, random_channel(phy.cp_len() + 1, ts, &mut rng), 0, map.bins(0).collect(), 1.0),
            InterfererSpec::new(2, random_channel(phy.cp_len() + 1, ts, &mut rng), 0, map.bins(2).collect(), 1.0),
        ];
        for s in specs.iter_mut() {
            s.draw_data(&phy, &mut rng).unwrap();
        }
        let rx = synthesize_received(&phy, &victim, &desired, &specs, 0.0, &mut rng).unwrap();
        let ici = phy.dft().forward(&rx.interference);
        let op = build_circulant(&phy, &victim).unwrap();
        for &k in &own {
            let wanted = (op.eigenvalues()[k] * desired.values()[k]).norm_sqr();
            assert!(ici[k].norm_sqr() <= 1e-10 * wanted, "bin {k}: {} vs {wanted}", ici[k].norm_sqr());
        }
        for spec in &specs {
            let psd = interference_psd(&phy, spec).unwrap();
            assert!(own.iter().all(|&k| psd[k] <= 1e-10 * op.eigenvalues()[k].norm_sqr()));
        }
    }
}

#[test]
fn any_gap_leaks_into_the_adjacent_rb() {
    let phy = OfdmPhy::<f64>::new(OfdmConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ts = phy.sample_period();
    let map = phy.rb_map().clone();
    let own: Vec<usize> = map.bins(2).collect();
    let limit = phy.symbol_len() as i64 - 1;
    for _ in 0..100 {
        let mut gap = 0;
        while gap == 0 {
            gap = rng.random_range(-limit..=limit) as isize;
        }
        // a response that fills the prefix leaves no slack for the gap to hide in
        let channel = random_channel(phy.cp_len() + 1, ts, &mut rng);
        let mut spec = InterfererSpec::new(1, channel, gap, map.bins(3).collect(), 1.0);
        let psd = interference_psd(&phy, &spec).unwrap();
        assert!(own.iter().all(|&k| psd[k] > 0.0), "gap {gap}");

        spec.draw_data(&phy, &mut rng).unwrap();
        let victim = DiscreteChannel::identity(ts);
        let rx = synthesize_received(&phy, &victim, &DataSymbol::zeros(phy.n_fft()), &[spec], 0.0, &mut rng).unwrap();
        let ici = phy.dft().forward(&rx.interference);
        assert!(own.iter().map(|&k| ici[k].norm_sqr()).sum::<f64>() > 0.0, "gap {gap}");
    }
}

#[test]
fn closed_form_sinr_matches_time_domain_with_two_interferers() {
    let phy = OfdmPhy::<f64>::new(OfdmConfig::with_samples(64, 16, 4, 8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ts = phy.sample_period();
    let map = phy.rb_map().clone();
    let victim = random_channel(6, ts, &mut rng);
    let allocation: Vec<usize> = map.bins(1).collect();
    let limit = phy.symbol_len() as i64 - 1;
    let specs = vec![
        InterfererSpec::new(1, random_channel(9, ts, &mut rng), rng.random_range(-limit..=limit) as isize, map.bins(0).collect(), 0.8),
        InterfererSpec::new(2, random_channel(12, ts, &mut rng), rng.random_range(-limit..=limit) as isize, map.bins(2).collect(), 1.5),
    ];
    let noise_var = 0.05;
    let mc = montecarlo_sinr(&phy, &victim, &allocation, &specs, 1.0, noise_var, 10_000, 11).unwrap();
    let op = build_circulant(&phy, &victim).unwrap();
    for (i, &k) in allocation.iter().enumerate() {
        let exact = subcarrier_sinr(&phy, k, &op, &specs, noise_var, 1.0, DEFAULT_SINGULAR_FLOOR).unwrap();
        let rel = (mc.sinr[i] - exact).abs() / exact;
        assert!(rel <= 0.05, "bin {k}: closed form {exact}, sampled {}", mc.sinr[i]);
    }
}

#[test]
fn adjacent_asynchronous_neighbour_distorts_cqi() {
    let mut env = CrEnv::new(EnvConfig::default()).unwrap();
    let (mut scenes, mut distorted, mut seed) = (0, 0, 0u64);
    while scenes < 1000 {
        env.reset(seed).unwrap();
        seed += 1;
        let truth = env.truth().unwrap().clone();
        let cqi = env.oracle_cqi().unwrap();
        let map = env.phy().rb_map().clone();
        let neighbours: Vec<usize> =
            env.sink_interferers().unwrap().iter().filter(|s| s.gap != 0).filter_map(|s| map.rb_of(s.allocation[0])).collect();
        let candidate = (0..env.n_rb()).find(|&rb| truth.available[rb] && neighbours.iter().any(|&o| o + 1 == rb || rb + 1 == o));
        let Some(rb) = candidate else { continue };
        scenes += 1;
        if truth.rates[rb] < shannon_rate(cqi[rb]) {
            distorted += 1;
        }
    }
    assert!(distorted as f64 >= 0.95 * scenes as f64, "{distorted} of {scenes}");
}
