use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwacr::baselines::{
    calibrate_epsilon, calibrate_on, collect_decisions, ed_epsilon_decide, success_rate, BaselineError, CalibrationConfig, CqiSource,
    EpsilonPolicyConfig, RbRank,
};
use uwacr::chanmodel::{AcousticEnv, DiscreteChannel};
use uwacr::env::{EnvConfig, ScenarioConfig};
use uwacr::phy::{synthesize_received, DataSymbol, InterfererSpec, OfdmConfig, OfdmPhy};
use uwacr::sensing::{energy_detect, observe_spectrum, SensingConfig};

fn grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 / 20.0).collect()
}

#[test]
fn success_is_monotone_in_epsilon_on_a_20_point_grid() {
    let env = EnvConfig::default();
    for policy in
        [EpsilonPolicyConfig::cqi(0.0, RbRank::Kth(1)), EpsilonPolicyConfig::cqi(0.0, RbRank::Random), EpsilonPolicyConfig::ed(0.0)]
    {
        let samples = collect_decisions(&env, &policy, 1000, 3).unwrap();
        let rates: Vec<f64> = grid().into_iter().map(|e| success_rate(&samples, e)).collect();
        assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{}: {rates:?}", policy.label());
    }
}

#[test]
fn interference_free_scene_needs_no_back_off() {
    let env = EnvConfig {
        channel: AcousticEnv::direct_path_only(),
        scenario: ScenarioConfig { active_min: 0, active_max: 0, ..Default::default() },
        ..Default::default()
    };
    let policy = EpsilonPolicyConfig { cqi_source: CqiSource::Oracle, ..EpsilonPolicyConfig::cqi(0.0, RbRank::Kth(1)) };
    let cal = calibrate_epsilon(&env, &policy, &CalibrationConfig::default()).unwrap();
    assert!(cal.epsilon <= 0.05, "{cal:?}");
    assert!(cal.success >= 0.9);
}

#[test]
fn calibration_hits_the_target_on_the_default_scene() {
    let cfg = CalibrationConfig::default();
    for policy in [EpsilonPolicyConfig::cqi(0.0, RbRank::Kth(1)), EpsilonPolicyConfig::ed(0.0)] {
        let cal = calibrate_epsilon(&EnvConfig::default(), &policy, &cfg).unwrap();
        assert!(cal.decisions >= 1000);
        assert!((cal.success - 0.9).abs() <= 0.02, "{}: {cal:?}", policy.label());
        assert!(cal.epsilon > 0.0 && cal.epsilon < 1.0, "{cal:?}");
    }
}

#[test]
fn unreachable_target_is_an_error() {
    use uwacr::baselines::DecisionSample;
    // half the decisions promise a rate no eps < 1 can bring down to zero
    let samples: Vec<DecisionSample> =
        (0..1000).map(|i| DecisionSample { cqi_rate: 1e6, true_rate: if i % 2 == 0 { 0.0 } else { 1e6 } }).collect();
    let err = calibrate_on(&samples, &CalibrationConfig::default()).unwrap_err();
    assert!(matches!(err, BaselineError::Unattainable { .. }), "{err:?}");
}

fn channel(p: &OfdmPhy<f64>, rng: &mut ChaCha8Rng) -> DiscreteChannel<f64> {
    let taps = (0..20)
        .map(|i| Complex::from_polar(if i == 0 { 1.0 } else { rng.random_range(0.05..0.6) }, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    DiscreteChannel::new(taps, p.sample_period()).unwrap()
}

fn occupant(p: &OfdmPhy<f64>, rb: usize, gap: isize, power: f64, rng: &mut ChaCha8Rng) -> InterfererSpec<f64> {
    let mut spec = InterfererSpec::new(1, channel(p, rng), gap, p.rb_map().bins(rb).collect(), power);
    spec.draw_data(p, rng).unwrap();
    spec
}

/// RB 0 carries a weak synchronous occupant, RB 1 is free, RB 2 carries a
/// strong asynchronous one. Leakage lifts the free RB above the weak occupant.
#[test]
fn leakage_makes_ed_pick_an_occupied_rb() {
    let p = OfdmPhy::new(OfdmConfig::with_samples(256, 60, 3, 10)).unwrap();
    let sensing = SensingConfig::default();
    let first = sensing.kept_bins(p.n_fft()).start;
    let mut misranked = 0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let others = [occupant(&p, 0, 0, 0.01, &mut rng), occupant(&p, 2, 97, 100.0, &mut rng)];
        let h = DiscreteChannel::identity(p.sample_period());
        let y = synthesize_received(&p, &h, &DataSymbol::zeros(p.n_fft()), &others, 1e-4, &mut rng).unwrap().y();
        let energy = energy_detect(&observe_spectrum(&p, &y, &sensing).unwrap(), p.rb_map(), first);
        let d = ed_epsilon_decide(&energy, &[1.0; 3], &EpsilonPolicyConfig::ed(0.0)).unwrap();
        if d.rb == 0 {
            assert!(energy[1] > energy[0]);
            misranked += 1;
        }
    }
    assert!(misranked >= 45, "{misranked}/50");
}

#[test]
fn without_leakage_ed_finds_the_free_rb() {
    let p = OfdmPhy::new(OfdmConfig::with_samples(256, 60, 3, 10)).unwrap();
    let sensing = SensingConfig::default();
    let first = sensing.kept_bins(p.n_fft()).start;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let others = [occupant(&p, 0, 0, 0.01, &mut rng), occupant(&p, 2, 0, 100.0, &mut rng)];
    let h = DiscreteChannel::identity(p.sample_period());
    let y = synthesize_received(&p, &h, &DataSymbol::zeros(p.n_fft()), &others, 1e-4, &mut rng).unwrap().y();
    let energy = energy_detect(&observe_spectrum(&p, &y, &sensing).unwrap(), p.rb_map(), first);
    assert_eq!(ed_epsilon_decide(&energy, &[1.0; 3], &EpsilonPolicyConfig::ed(0.0)).unwrap().rb, 1);
}
