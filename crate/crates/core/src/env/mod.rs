//! The cognitive-radio episode environment.
//!
//! Node 0 is the learner; nodes `1..S` are scripted interferers that hold distinct
//! RBs for geometrically distributed dwell times. Every step the learner sees a
//! beacon CQI vector and a sensed spectrum, picks an RB and a rate, and is judged
//! against the oracle's achievable rate at the sink. Time gaps at the sink and at
//! the learner are drawn independently each step.

mod reward;
mod trace;

pub use reward::{
    compute_reward, optimal_rb_probs, oracle_action, oracle_best_reward, rate_term, rb_term, select_decision, ActionMatrix,
    RewardBreakdown, RewardWeights, ThroughputTerm,
};
pub use trace::{read_trace, TraceRecord, TraceWriter};

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chanmodel::{discretize, generate_cir, AcousticEnv, ChannelError, Endpoint, Geometry3D, LinkId};
use crate::oracle::{compute_cqi, ground_truth, BeaconSpec, GroundTruth, OracleError, DEFAULT_SINGULAR_FLOOR};
use crate::phy::{build_circulant, complex_gaussian, synthesize_received, CirculantOperator, InterfererSpec, OfdmConfig, PhyError};
use crate::sensing::{beacon_cqi, observe_spectrum, Observation, SensingConfig, SensingError};
use crate::{derive_seed, Channel, Phy};

/// Per-subcarrier transmit power of every node and of the beacon.
pub const TX_POWER: f64 = 1.0;

/// Slack allowed when comparing a chosen rate with the achievable rate.
pub const RATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid action: {0}")]
    BadAction(String),
    #[error("no RB is free in this state")]
    NoFreeRb,
    #[error("episode already terminated")]
    Terminated,
    #[error("environment has not been reset")]
    NotReset,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Sensor nodes including the learner.
    pub n_nodes: usize,
    /// Active interferer count at reset is uniform on `active_min..=active_max`
    /// and stays constant through the episode.
    pub active_min: usize,
    pub active_max: usize,
    /// Mean per-subcarrier receive SNR of the learner's uplink over the RB band.
    pub snr_db: f64,
    /// Mean RB holding time of an interferer, in steps.
    pub dwell_mean: f64,
    /// Gaps are uniform on `-max_gap..=max_gap` samples; `None` means one sample
    /// short of a full symbol.
    pub max_gap: Option<usize>,
    pub horizon: usize,
    /// Simulation box in metres (x, y, depth).
    pub bounds: [f64; 3],
    /// Maximum horizontal drift speed, m/s.
    pub drift_speed: f64,
    /// Seconds between decisions; `None` means one packet duration.
    pub step_duration: Option<f64>,
    /// Fixes geometry and channels across episodes.
    pub scene_seed: Option<u64>,
    /// Whether interferers are heard during the beacon as well.
    pub beacon_interference: bool,
    pub throughput: ThroughputTerm,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_nodes: 5,
            active_min: 1,
            active_max: 3,
            snr_db: 6.0,
            dwell_mean: 8.0,
            max_gap: None,
            horizon: 64,
            bounds: [1000.0, 1000.0, 200.0],
            drift_speed: 0.5,
            step_duration: None,
            scene_seed: None,
            beacon_interference: false,
            throughput: ThroughputTerm::Realized,
        }
    }
}

impl ScenarioConfig {
    /// The learner and a single always-active interferer in a fixed, motionless scene.
    pub fn two_node_static() -> Self {
        Self {
            n_nodes: 2,
            active_min: 1,
            active_max: 1,
            snr_db: 10.0,
            drift_speed: 0.0,
            scene_seed: Some(7),
            horizon: 16,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub ofdm: OfdmConfig,
    pub channel: AcousticEnv,
    pub scenario: ScenarioConfig,
    pub sensing: SensingConfig,
    pub reward: RewardWeights,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.ofdm.validate()?;
        self.channel.validate()?;
        self.reward.validate()?;
        let s = &self.scenario;
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if s.n_nodes == 0 {
            return bad("scenario.n_nodes must be at least 1".into());
        }
        if s.active_min > s.active_max {
            return bad("scenario.active_min exceeds scenario.active_max".into());
        }
        if s.active_max > s.n_nodes - 1 {
            return bad(format!("scenario.active_max = {} but only {} interferers exist", s.active_max, s.n_nodes - 1));
        }
        if s.active_max > self.ofdm.n_rb {
            return bad(format!("scenario.active_max = {} exceeds the {} RBs", s.active_max, self.ofdm.n_rb));
        }
        if !(s.snr_db.is_finite()) {
            return bad("scenario.snr_db must be finite".into());
        }
        if !(s.dwell_mean >= 1.0) {
            return bad("scenario.dwell_mean must be at least 1".into());
        }
        if s.horizon == 0 {
            return bad("scenario.horizon must be positive".into());
        }
        if s.bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("scenario.bounds must be positive".into());
        }
        if !(s.drift_speed.is_finite() && s.drift_speed >= 0.0) {
            return bad("scenario.drift_speed must be nonnegative".into());
        }
        if let Some(dt) = s.step_duration {
            if !(dt.is_finite() && dt >= 0.0) {
                return bad("scenario.step_duration must be nonnegative".into());
            }
        }
        let ls = self.ofdm.cp_len() + self.ofdm.n_fft;
        if let Some(g) = s.max_gap {
            if g >= ls {
                return bad(format!("scenario.max_gap = {g} must be below the symbol length {ls}"));
            }
        }
        self.sensing.validate(&self.ofdm.rb_map(), self.ofdm.n_fft)?;
        Ok(())
    }
}

/// Everything [`CrEnv::step`] reports.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rb: usize,
    pub rate: f64,
    pub reward: f64,
    pub breakdown: Option<RewardBreakdown>,
    pub success: bool,
    /// No RB was free, so nothing was transmitted and the reward is zero.
    pub skipped: bool,
    /// The chosen rate on success, zero otherwise.
    pub throughput: f64,
    pub truth: GroundTruth<f64>,
    pub observation: Observation<f64>,
    pub done: bool,
}

struct State {
    geometry: Geometry3D,
    link_seed: u64,
    noise_var: f64,
    /// RB held by each node; the learner's slot stays `None`.
    assignment: Vec<Option<usize>>,
    t: usize,
    uplink: Vec<Channel>,
    sensing: Vec<Channel>,
    victim: CirculantOperator<f64>,
    gaps: Vec<isize>,
    sensing_gaps: Vec<isize>,
    truth: GroundTruth<f64>,
    observation: Observation<f64>,
}

pub struct CrEnv {
    config: EnvConfig,
    phy: Phy,
    beacon: BeaconSpec<f64>,
    rng: ChaCha8Rng,
    episode: u64,
    state: Option<State>,
}

impl CrEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let phy = Phy::new(config.ofdm.clone())?;
        let period = config.ofdm.symbol_duration + config.ofdm.cp_duration;
        let beacon = BeaconSpec::full_band(&phy, 0x6265_6163_6f6e, period);
        Ok(Self { config, phy, beacon, rng: ChaCha8Rng::seed_from_u64(0), episode: 0, state: None })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn phy(&self) -> &Phy {
        &self.phy
    }

    pub fn beacon(&self) -> &BeaconSpec<f64> {
        &self.beacon
    }

    pub fn n_rb(&self) -> usize {
        self.config.ofdm.n_rb
    }

    pub fn n_sens(&self) -> usize {
        self.config.sensing.n_sens
    }

    /// DFT bin of spectrum row 0.
    pub fn first_sensed_bin(&self) -> usize {
        self.config.sensing.kept_bins(self.config.ofdm.n_fft).start
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    fn state(&self) -> Result<&State, EnvError> {
        self.state.as_ref().ok_or(EnvError::NotReset)
    }

    pub fn t(&self) -> Result<usize, EnvError> {
        Ok(self.state()?.t)
    }

    pub fn is_done(&self) -> bool {
        self.state.as_ref().is_some_and(|s| s.t >= self.config.scenario.horizon)
    }

    pub fn noise_var(&self) -> Result<f64, EnvError> {
        Ok(self.state()?.noise_var)
    }

    /// Oracle knowledge of the current state.
    pub fn truth(&self) -> Result<&GroundTruth<f64>, EnvError> {
        Ok(&self.state()?.truth)
    }

    pub fn observation(&self) -> Result<&Observation<f64>, EnvError> {
        Ok(&self.state()?.observation)
    }

    /// RB occupancy as the interferers' assignments say.
    pub fn occupied(&self) -> Result<Vec<bool>, EnvError> {
        let mut occ = vec![false; self.n_rb()];
        for rb in self.state()?.assignment.iter().flatten() {
            occ[*rb] = true;
        }
        Ok(occ)
    }

    pub fn active_count(&self) -> Result<usize, EnvError> {
        Ok(self.state()?.assignment.iter().flatten().count())
    }

    /// Noise-only CQI of the learner's link, exact.
    pub fn oracle_cqi(&self) -> Result<Vec<f64>, EnvError> {
        let s = self.state()?;
        Ok(compute_cqi(&self.phy, &self.beacon, &s.victim, s.noise_var, DEFAULT_SINGULAR_FLOOR)?)
    }

    /// Interferers as seen at the sink in the current state.
    pub fn sink_interferers(&self) -> Result<Vec<InterfererSpec<f64>>, EnvError> {
        let s = self.state()?;
        Ok(self.specs(s, &s.uplink, &s.gaps))
    }

    pub fn victim_channel(&self) -> Result<&Channel, EnvError> {
        Ok(&self.state()?.uplink[0])
    }

    fn specs(&self, s: &State, channels: &[Channel], gaps: &[isize]) -> Vec<InterfererSpec<f64>> {
        let map = self.phy.rb_map();
        s.assignment
            .iter()
            .enumerate()
            .filter_map(|(node, rb)| {
                rb.map(|rb| InterfererSpec::new(node, channels[node].clone(), gaps[node], map.bins(rb).collect(), TX_POWER))
            })
            .collect()
    }

    fn channel(&self, geometry: &Geometry3D, link: LinkId, seed: u64) -> Result<Channel, EnvError> {
        let cir = generate_cir::<f64>(geometry, link, &self.config.channel, seed)?;
        let (_, local) = cir.split_bulk_delay();
        Ok(discretize(&local, self.phy.sample_period(), self.phy.cp_len() + 1)?)
    }

    fn build_channels(&self, s: &mut State) -> Result<(), EnvError> {
        let n = self.config.scenario.n_nodes;
        s.uplink = (0..n)
            .map(|i| self.channel(&s.geometry, LinkId::new(Endpoint::Node(i), Endpoint::Sink), derive_seed(s.link_seed, 2 * i as u64)))
            .collect::<Result<_, _>>()?;
        s.sensing = (0..n)
            .map(|i| {
                if i == 0 {
                    Ok(Channel::identity(self.phy.sample_period()))
                } else {
                    self.channel(&s.geometry, LinkId::new(Endpoint::Node(i), Endpoint::Node(0)), derive_seed(s.link_seed, 2 * i as u64 + 1))
                }
            })
            .collect::<Result<_, _>>()?;
        s.victim = build_circulant(&self.phy, &s.uplink[0])?;
        Ok(())
    }

    fn max_gap(&self) -> i64 {
        self.config.scenario.max_gap.unwrap_or(self.phy.symbol_len() - 1) as i64
    }

    /// Starts a new episode; the same seed always yields the same episode.
    pub fn reset(&mut self, seed: u64) -> Result<Observation<f64>, EnvError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.episode = seed;
        let sc = self.config.scenario.clone();
        let mut scene_rng = match sc.scene_seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::seed_from_u64(self.rng.next_u64()),
        };
        let geometry = Geometry3D::random(sc.bounds, sc.n_nodes, sc.drift_speed, &mut scene_rng);
        let link_seed = scene_rng.next_u64();

        let identity = build_circulant(&self.phy, &Channel::identity(self.phy.sample_period()))?;
        let mut state = State {
            geometry,
            link_seed,
            noise_var: 1.0,
            assignment: vec![None; sc.n_nodes],
            t: 0,
            uplink: Vec::new(),
            sensing: Vec::new(),
            victim: identity,
            gaps: vec![0; sc.n_nodes],
            sensing_gaps: vec![0; sc.n_nodes],
            truth: GroundTruth { available: Vec::new(), rates: Vec::new() },
            observation: Observation { cqi: Vec::new(), spectrum: Vec::new() },
        };
        self.build_channels(&mut state)?;
        let bins = self.phy.rb_map().all_bins();
        let gain = bins.iter().map(|&k| state.victim.eigenvalues()[k].norm_sqr()).sum::<f64>() / bins.len() as f64;
        state.noise_var = TX_POWER * gain / 10f64.powf(sc.snr_db / 10.0);

        let n_active = self.rng.random_range(sc.active_min..=sc.active_max);
        let mut nodes: Vec<usize> = (1..sc.n_nodes).collect();
        nodes.shuffle(&mut self.rng);
        let mut rbs: Vec<usize> = (0..self.n_rb()).collect();
        rbs.shuffle(&mut self.rng);
        for (node, rb) in nodes.into_iter().zip(rbs).take(n_active) {
            state.assignment[node] = Some(rb);
        }
        self.refresh(&mut state)?;
        let obs = state.observation.clone();
        self.state = Some(state);
        Ok(obs)
    }

    fn advance_occupancy(&mut self, s: &mut State) {
        let p_leave = 1.0 / self.config.scenario.dwell_mean;
        for node in 1..s.assignment.len() {
            if s.assignment[node].is_none() || self.rng.random::<f64>() >= p_leave {
                continue;
            }
            s.assignment[node] = None;
            let idle: Vec<usize> = (1..s.assignment.len()).filter(|&i| s.assignment[i].is_none()).collect();
            let held: Vec<usize> = s.assignment.iter().flatten().copied().collect();
            let free: Vec<usize> = (0..self.n_rb()).filter(|rb| !held.contains(rb)).collect();
            let next = idle[self.rng.random_range(0..idle.len())];
            s.assignment[next] = Some(free[self.rng.random_range(0..free.len())]);
        }
    }

    /// Draws gaps, then recomputes the ground truth and the observation.
    fn refresh(&mut self, s: &mut State) -> Result<(), EnvError> {
        let g = self.max_gap();
        for i in 1..s.gaps.len() {
            s.gaps[i] = self.rng.random_range(-g..=g) as isize;
            s.sensing_gaps[i] = self.rng.random_range(-g..=g) as isize;
        }
        let at_sink = self.specs(s, &s.uplink, &s.gaps);
        s.truth = ground_truth(&self.phy, &s.victim, &at_sink, TX_POWER, s.noise_var, DEFAULT_SINGULAR_FLOOR)?;

        let mut heard = self.specs(s, &s.sensing, &s.sensing_gaps);
        for spec in heard.iter_mut() {
            spec.draw_data(&self.phy, &mut self.rng)?;
        }
        let beacon_interferers: &[InterfererSpec<f64>] = if self.config.scenario.beacon_interference { &heard } else { &[] };
        let rx = synthesize_received(&self.phy, &s.uplink[0], &self.beacon.symbol(), beacon_interferers, s.noise_var, &mut self.rng)?;
        let cqi = beacon_cqi(&self.phy, &rx.y(), &self.beacon, s.noise_var)?;

        let n = self.phy.n_fft();
        let scale = 1.0 / s.noise_var.sqrt();
        let mut samples = Vec::with_capacity(n * self.config.sensing.segments);
        for seg in 0..self.config.sensing.segments {
            if seg > 0 {
                for spec in heard.iter_mut() {
                    spec.draw_data(&self.phy, &mut self.rng)?;
                }
            }
            let mut window: Vec<Complex<f64>> = (0..n).map(|_| complex_gaussian(s.noise_var, &mut self.rng)).collect();
            for spec in &heard {
                if spec.overlaps(&self.phy) {
                    for (w, v) in window.iter_mut().zip(spec.contribution(&self.phy)?) {
                        *w += v;
                    }
                }
            }
            samples.extend(window.into_iter().map(|x| x * scale));
        }
        let spectrum = observe_spectrum(&self.phy, &samples, &self.config.sensing)?;
        s.observation = Observation { cqi, spectrum };
        Ok(())
    }

    /// Applies `action`, judges it against the current ground truth, then moves
    /// the world forward one step.
    pub fn step(&mut self, action: &ActionMatrix) -> Result<StepOutcome, EnvError> {
        self.step_with(action, None)
    }

    /// Like [`CrEnv::step`] but transmits on `rb` at `action.rates[rb]` instead of
    /// the arg-max decision. Used for exploration, where the RB is sampled.
    pub fn step_on(&mut self, action: &ActionMatrix, rb: usize) -> Result<StepOutcome, EnvError> {
        if rb >= self.n_rb() {
            return Err(EnvError::BadAction(format!("RB {rb} out of range")));
        }
        self.step_with(action, Some(rb))
    }

    fn step_with(&mut self, action: &ActionMatrix, decision: Option<usize>) -> Result<StepOutcome, EnvError> {
        action.validate()?;
        if action.n_rb() != self.n_rb() {
            return Err(EnvError::BadAction(format!("action has {} RBs, expected {}", action.n_rb(), self.n_rb())));
        }
        let mut s = self.state.take().ok_or(EnvError::NotReset)?;
        if s.t >= self.config.scenario.horizon {
            self.state = Some(s);
            return Err(EnvError::Terminated);
        }
        let result = self.step_inner(&mut s, action, decision);
        self.state = Some(s);
        result
    }

    fn step_inner(&mut self, s: &mut State, action: &ActionMatrix, decision: Option<usize>) -> Result<StepOutcome, EnvError> {
        let truth = s.truth.clone();
        let (rb, rate) = match decision {
            Some(rb) => (rb, action.rates[rb]),
            None => select_decision(action),
        };
        let w = self.config.reward;
        let (reward, breakdown, success, skipped, throughput) = if truth.any_available() {
            let success = truth.available[rb] && rate <= truth.rates[rb] + RATE_TOLERANCE;
            let throughput = if success { rate } else { 0.0 };
            let mut b = compute_reward(action, &truth, &w)?;
            if decision.is_some() {
                b.throughput = rate;
                b.total = w.w5 * b.r_rb + w.w6 * b.r_rate + w.w7 * rate;
            }
            let reward = match self.config.scenario.throughput {
                ThroughputTerm::Estimate => b.total,
                ThroughputTerm::Realized => w.w5 * b.r_rb + w.w6 * b.r_rate + w.w7 * throughput,
            };
            (reward, Some(b), success, false, throughput)
        } else {
            (0.0, None, false, true, 0.0)
        };

        s.t += 1;
        let done = s.t >= self.config.scenario.horizon;
        if !done {
            let dt = self.config.scenario.step_duration.unwrap_or_else(|| {
                let c = &self.config.ofdm;
                c.symbols_per_packet as f64 * (c.symbol_duration + c.cp_duration)
            });
            if self.config.scenario.drift_speed > 0.0 && dt > 0.0 {
                s.geometry.advance(dt);
                self.build_channels(s)?;
            }
            self.advance_occupancy(s);
            self.refresh(s)?;
        }
        Ok(StepOutcome { rb, rate, reward, breakdown, success, skipped, throughput, truth, observation: s.observation.clone(), done })
    }

    pub fn trace_record(&self, t: usize, outcome: &StepOutcome) -> TraceRecord {
        TraceRecord {
            episode: self.episode,
            t,
            rb: outcome.rb,
            rate: outcome.rate,
            success: outcome.success,
            skipped: outcome.skipped,
            reward: outcome.reward,
            throughput: outcome.throughput,
            v_rb: outcome.truth.available.iter().map(|&a| a as u8).collect(),
            v_rate: outcome.truth.rates.clone(),
        }
    }
}
