use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwacr::agent::{
    actor_forward, actor_objective, compute_gae, critic_forward, critic_loss, inputs_from, sample_action, train, Activation,
    ActorObjective, ActorStep, Agent, AgentConfig, Checkpoint, GaeConfig, Inputs, NetShape, RateGradient, Transition,
};
use uwacr::env::{EnvConfig, RewardWeights, ScenarioConfig, ThroughputTerm};
use uwacr::oracle::GroundTruth;
use uwacr::sensing::Observation;

/// Truncated n-step advantage: `sum_{l<n} g^l r_{t+l} + g^n V_{t+n} - V_t`, with
/// the value past the end taken as zero.
fn n_step(r: &[f64], v: &[f64], gamma: f64, t: usize, n: usize) -> f64 {
    let mut a = -v[t];
    for l in 0..n {
        a += gamma.powi(l as i32) * r[t + l];
    }
    a + gamma.powi(n as i32) * v.get(t + n).copied().unwrap_or(0.0)
}

/// `(1 - lambda) sum_{n<N} lambda^{n-1} a^(n) + lambda^{N-1} a^(N)`, `N = T - t`.
fn gae_double_sum(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let len = r.len();
    (0..len)
        .map(|t| {
            let horizon = len - t;
            let mut a = 0.0;
            for n in 1..horizon {
                a += (1.0 - lambda) * lambda.powi(n as i32 - 1) * n_step(r, v, gamma, t, n);
            }
            a + lambda.powi(horizon as i32 - 1) * n_step(r, v, gamma, t, horizon)
        })
        .collect()
}

#[test]
fn gae_matches_the_brute_force_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = GaeConfig { gamma: 0.9, lambda: 0.7 };
    for _ in 0..100 {
        let r: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fast = compute_gae(&r, &v, &cfg).unwrap();
        for (a, b) in fast.iter().zip(gae_double_sum(&r, &v, cfg.gamma, cfg.lambda)) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn gae_lambda_zero_is_the_one_step_advantage() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = GaeConfig { gamma: 0.8, lambda: 0.0 };
    let r: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = compute_gae(&r, &v, &cfg).unwrap();
    for t in 0..10 {
        let next = if t + 1 < 10 { v[t + 1] } else { 0.0 };
        assert_eq!(a[t], r[t] + 0.8 * next - v[t]);
        assert!((a[t] - n_step(&r, &v, 0.8, t, 1)).abs() <= 1e-15);
    }
    assert_eq!(compute_gae(&[0.0; 5], &[0.0; 5], &GaeConfig::default()).unwrap(), vec![0.0; 5]);
}

fn tiny(n_rb: usize, n_out: usize) -> NetShape {
    NetShape { n_rb, n_sens: 2, conv_channels: 1, kernel: 1, pool: 2, conv_activation: Activation::Tanh, hidden: vec![2], n_out }
}

fn random_inputs(shape: &NetShape, rng: &mut ChaCha8Rng) -> Inputs<f64> {
    Inputs {
        spectrum: (0..2 * shape.n_sens).map(|_| rng.random_range(-2.0..2.0)).collect(),
        cqi: (0..shape.n_rb).map(|_| rng.random_range(0.0..4.0)).collect(),
    }
}

fn random_params(shape: &NetShape, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..shape.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn check_fd(params: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64) {
    let h = 1e-5;
    for i in 0..params.len() {
        let mut p = params.to_vec();
        p[i] += h;
        let up = f(&p);
        p[i] -= 2.0 * h;
        let down = f(&p);
        let fd = (up - down) / (2.0 * h);
        assert!(rel_err(analytic[i], fd) <= 1e-4, "param {i}: analytic {} vs fd {fd}", analytic[i]);
    }
}

#[test]
fn actor_gradient_matches_finite_differences_on_small_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n_rb in [1, 2] {
        let shape = tiny(n_rb, 2 * n_rb);
        assert_eq!(shape.feature_len(), n_rb + 1);
        for mode in [RateGradient::Score, RateGradient::Analytic] {
            for _ in 0..5 {
                let x = random_inputs(&shape, &mut rng);
                let params = random_params(&shape, &mut rng);
                let raw: Vec<f64> = (0..n_rb).map(|_| rng.random_range(0.0..3.0)).collect();
                let truth = GroundTruth {
                    available: (0..n_rb).map(|i| i == 0).collect(),
                    rates: (0..n_rb).map(|i| if i == 0 { 1.5 } else { 0.0 }).collect(),
                };
                let step = ActorStep {
                    inputs: &x,
                    rb: n_rb - 1,
                    raw_rates: &raw,
                    sigma: 0.4,
                    advantage: rng.random_range(-1.0..1.0),
                    truth: Some(&truth),
                };
                let obj = ActorObjective {
                    entropy: 0.05,
                    aux: 0.7,
                    reward: RewardWeights::default(),
                    throughput: ThroughputTerm::Realized,
                    rate_gradient: mode,
                };
                let mut grad = vec![0.0; params.len()];
                actor_objective(&shape, &params, &step, &obj, 1.0, &mut grad).unwrap();
                check_fd(&params, &grad, |p| actor_objective(&shape, p, &step, &obj, 1.0, &mut vec![0.0; p.len()]).unwrap());
            }
        }
    }
}

#[test]
fn critic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let shape = tiny(1, 1);
    for _ in 0..10 {
        let x = random_inputs(&shape, &mut rng);
        let params = random_params(&shape, &mut rng);
        let target = rng.random_range(-3.0..3.0);
        let mut grad = vec![0.0; params.len()];
        critic_loss(&shape, &params, &x, target, 1.0, &mut grad).unwrap();
        check_fd(&params, &grad, |p| critic_loss(&shape, p, &x, target, 1.0, &mut vec![0.0; p.len()]).unwrap());
    }
}

#[test]
fn zero_parameters_output_the_bias_and_the_head_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let shape = NetShape { hidden: vec![4, 3], ..tiny(3, 1) };
    let x = random_inputs(&shape, &mut rng);
    let mut zero = vec![0.0; shape.n_params()];
    assert_eq!(critic_forward(&shape, &zero, &x).unwrap(), 0.0);
    zero[shape.output_bias_offset()] = 0.37;
    assert_eq!(critic_forward(&shape, &zero, &x).unwrap(), 0.37);

    let mut params = random_params(&shape, &mut rng);
    let bias = params[shape.output_bias_offset()];
    let before = critic_forward(&shape, &params, &x).unwrap() - bias;
    for w in &mut params[shape.output_weight_offset()..shape.output_bias_offset()] {
        *w *= 2.0;
    }
    let after = critic_forward(&shape, &params, &x).unwrap() - bias;
    assert!((after - 2.0 * before).abs() <= 1e-12 * before.abs().max(1.0), "{after} vs {before}");
}

fn with_logits(shape: &NetShape, logits: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; shape.n_params()];
    let off = shape.output_bias_offset();
    p[off..off + logits.len()].copy_from_slice(logits);
    p
}

#[test]
fn categorical_sampling_matches_the_probabilities() {
    let shape = tiny(2, 4);
    let params = with_logits(&shape, &[0.2f64.ln(), 0.8f64.ln(), 0.5, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let out = actor_forward(&shape, &params, &random_inputs(&shape, &mut rng)).unwrap();
    assert!((out.probs[0] - 0.2).abs() < 1e-12);
    let n = 100_000;
    let ones = (0..n).filter(|_| sample_action(&out, 0.1, true, &mut rng).rb == 1).count();
    assert!((ones as f64 / n as f64 - 0.8).abs() <= 0.01, "{ones}");
}

#[test]
fn greedy_and_one_hot_sampling() {
    let shape = tiny(2, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let x = random_inputs(&shape, &mut rng);
    let out = actor_forward(&shape, &random_params(&shape, &mut rng), &x).unwrap();
    let s = sample_action(&out, 0.3, false, &mut rng);
    assert_eq!(s.rb, if out.probs[1] > out.probs[0] { 1 } else { 0 });
    assert_eq!(s.rate, out.rates[s.rb]);

    let out = actor_forward(&shape, &with_logits(&shape, &[-60.0, 60.0, 0.0, 0.0]), &x).unwrap();
    assert!((0..1000).all(|_| sample_action(&out, 0.3, true, &mut rng).rb == 1));
}

fn small_config() -> AgentConfig {
    AgentConfig { conv_channels: 2, kernel: 3, pool: 2, hidden: vec![8], ..Default::default() }
}

fn observation(rng: &mut ChaCha8Rng, n_rb: usize, n_sens: usize) -> Observation<f64> {
    Observation {
        cqi: (0..n_rb).map(|_| rng.random_range(0.0..30.0)).collect(),
        spectrum: (0..n_sens).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect(),
    }
}

fn episode(agent: &Agent<f64>, rewards: &[f64], rng: &mut ChaCha8Rng) -> Vec<Transition<f64>> {
    rewards
        .iter()
        .map(|&reward| {
            let inputs = inputs_from(&observation(rng, 3, 8), 3, 8).unwrap();
            let out = actor_forward(&agent.actor_shape, &agent.actor, &inputs).unwrap();
            let s = sample_action(&out, 0.3, true, rng);
            Transition {
                value: critic_forward(&agent.critic_shape, &agent.critic, &inputs).unwrap(),
                inputs,
                rb: s.rb,
                raw_rates: s.raw_rates,
                sigma: 0.3,
                reward,
                log_prob: s.log_prob,
                truth: Some(GroundTruth { available: vec![true, false, true], rates: vec![1.0, 0.0, 2.0] }),
            }
        })
        .collect()
}

#[test]
fn zero_advantages_leave_the_actor_unchanged() {
    let cfg = AgentConfig { entropy: 0.0, aux_weight: 0.0, ..small_config() };
    let mut agent = Agent::<f64>::new(cfg, 3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mut batch = vec![episode(&agent, &[0.0; 6], &mut rng), episode(&agent, &[0.0; 4], &mut rng)];
    batch.iter_mut().flatten().for_each(|t| t.value = 0.0);
    let before = agent.actor.clone();
    let diag = agent.update(&batch).unwrap();
    assert!(!diag.rejected);
    assert_eq!(diag.actor_grad_norm, 0.0);
    assert_eq!(agent.actor, before);
}

#[test]
fn centred_updates_ignore_a_constant_advantage_shift() {
    let cfg = AgentConfig { lambda: 0.0, ..small_config() };
    let base = Agent::<f64>::new(cfg, 3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let rewards: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let batch = vec![episode(&base, &rewards, &mut rng)];
    let mut shifted = batch.clone();
    shifted.iter_mut().flatten().for_each(|t| t.reward += 5.0);
    let (mut a, mut b) = (base.clone(), base);
    a.update(&batch).unwrap();
    b.update(&shifted).unwrap();
    for (x, y) in a.actor.iter().zip(&b.actor) {
        assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
    }
}

#[test]
fn critic_learns_the_discounted_constant_reward() {
    let gamma = 0.5;
    let cfg = AgentConfig { gamma, lambda: 0.9, aux_weight: 0.0, critic_lr: 1e-2, ..small_config() };
    let mut agent = Agent::<f64>::new(cfg, 3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let obs = observation(&mut rng, 3, 8);
    let x = inputs_from::<f64>(&obs, 3, 8).unwrap();
    let horizon = 200;
    for _ in 0..600 {
        let v = critic_forward(&agent.critic_shape, &agent.critic, &x).unwrap();
        let mut ep = episode(&agent, &vec![1.0; horizon], &mut rng);
        for t in &mut ep {
            t.inputs = x.clone();
            t.value = v;
        }
        agent.update(&[ep]).unwrap();
    }
    let v = critic_forward(&agent.critic_shape, &agent.critic, &x).unwrap();
    let expected = 1.0 / (1.0 - gamma);
    assert!((v - expected).abs() <= 0.05 * expected, "{v} vs {expected}");
}

fn quick_env() -> EnvConfig {
    EnvConfig { scenario: ScenarioConfig { horizon: 4, ..ScenarioConfig::two_node_static() }, ..Default::default() }
}

#[test]
fn zero_budget_returns_the_initial_agent() {
    let cfg = AgentConfig { episodes: 0, ..Default::default() };
    let env = quick_env();
    let result = train::<f64>(&env, &cfg).unwrap();
    let probe = uwacr::env::CrEnv::new(env).unwrap();
    let fresh = Agent::<f64>::new(cfg, probe.n_rb(), probe.n_sens()).unwrap();
    assert!(result.log.is_empty());
    assert_eq!(result.agent.actor, fresh.actor);
    assert_eq!(result.agent.critic, fresh.critic);
}

#[test]
fn training_is_bit_identical_for_a_fixed_seed() {
    let cfg = AgentConfig { episodes: 24, seed: 5, ..Default::default() };
    let a = train::<f64>(&quick_env(), &cfg).unwrap();
    let b = train::<f64>(&quick_env(), &cfg).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.agent.actor, b.agent.actor);
    assert_eq!(a.agent.critic, b.agent.critic);
    assert!(a.agent.actor.iter().chain(&a.agent.critic).all(|v| v.is_finite()));
    let c = train::<f64>(&quick_env(), &AgentConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.agent.actor, c.agent.actor);
}

#[test]
fn checkpoints_round_trip_through_a_file() {
    let result = train::<f64>(&quick_env(), &AgentConfig { episodes: 16, ..Default::default() }).unwrap();
    let dir = std::env::temp_dir().join(format!("uwacr-ck-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("agent.json");
    result.agent.checkpoint().save(&path).unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    assert_eq!(ck, result.agent.checkpoint());
    let restored = Agent::<f64>::from_checkpoint(&ck).unwrap();
    assert_eq!(restored.actor, result.agent.actor);
    assert_eq!(restored.critic, result.agent.critic);
    let mut env = uwacr::env::CrEnv::new(quick_env()).unwrap();
    let obs = env.reset(3).unwrap();
    assert_eq!(restored.greedy_action(&obs).unwrap(), result.agent.greedy_action(&obs).unwrap());

    let mut bad = ck.clone();
    bad.version += 1;
    assert!(Checkpoint::from_json(&bad.to_json()).is_err());
    std::fs::remove_dir_all(dir).unwrap();
}
