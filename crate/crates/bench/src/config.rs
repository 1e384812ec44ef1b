//! The experiment file: a versioned TOML document with one section per module.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uwacr::agent::AgentConfig;
use uwacr::baselines::{CalibrationConfig, RbRank};
use uwacr::chanmodel::AcousticEnv;
use uwacr::env::{EnvConfig, RewardWeights, ScenarioConfig};
use uwacr::phy::OfdmConfig;
use uwacr::sensing::SensingConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config at `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn at(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.into(), message: message.into() }
    }
}

/// A policy evaluated by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyId {
    Agent,
    CqiEps { k: RbRank },
    EdEps,
    Oracle,
    Random,
}

impl PolicyId {
    pub fn label(&self) -> String {
        match self {
            PolicyId::Agent => "agent".into(),
            PolicyId::CqiEps { k } => format!("cqi_eps_{k}"),
            PolicyId::EdEps => "ed_eps".into(),
            PolicyId::Oracle => "oracle".into(),
            PolicyId::Random => "random".into(),
        }
    }

    pub fn default_set() -> Vec<PolicyId> {
        vec![
            PolicyId::Agent,
            PolicyId::CqiEps { k: RbRank::Kth(1) },
            PolicyId::CqiEps { k: RbRank::Random },
            PolicyId::EdEps,
            PolicyId::Oracle,
            PolicyId::Random,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub snr_db: Vec<f64>,
    /// Evaluation episodes per (policy, SNR) point.
    pub episodes: usize,
    pub policies: Vec<PolicyId>,
    /// Root of every evaluation seed; each episode index derives its own stream.
    pub seed: u64,
    /// Moving-average window of the training curves.
    pub curve_window: usize,
    /// Fixed back-off for the CQI policies; calibrated per SNR point when absent.
    pub cqi_epsilon: Option<f64>,
    /// Fixed back-off for ED; calibrated per SNR point when absent.
    pub ed_epsilon: Option<f64>,
    pub calibration: CalibrationConfig,
    /// Agent checkpoint for `eval`; `<out>/checkpoint.json` when absent.
    pub checkpoint: Option<PathBuf>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            snr_db: (0..9).map(|i| -4.0 + 2.0 * i as f64).collect(),
            episodes: 1000,
            policies: PolicyId::default_set(),
            seed: 1,
            curve_window: 100,
            cqi_epsilon: None,
            ed_epsilon: None,
            calibration: CalibrationConfig::default(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub version: u32,
    #[serde(default)]
    pub ofdm: OfdmConfig,
    #[serde(default)]
    pub channel: AcousticEnv,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub sensing: SensingConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub reward: RewardWeights,
    #[serde(default)]
    pub bench: BenchSection,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            ofdm: OfdmConfig::default(),
            channel: AcousticEnv::default(),
            scenario: ScenarioConfig::default(),
            sensing: SensingConfig::default(),
            agent: AgentConfig::default(),
            reward: RewardWeights::default(),
            bench: BenchSection::default(),
        }
    }
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Parses and validates. Errors carry the dotted path of the offending key.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: toml::Table = toml::from_str(text).map_err(|e| ConfigError::at("<document>", e.message()))?;
        match value.get("version") {
            None => return Err(ConfigError::at("version", format!("missing; expected version = {CONFIG_VERSION}"))),
            Some(toml::Value::Integer(v)) if *v == CONFIG_VERSION as i64 => {}
            Some(other) => return Err(ConfigError::at("version", format!("unsupported value {other}; expected {CONFIG_VERSION}"))),
        }
        let cfg: BenchConfig = serde_path_to_error::deserialize(toml::Value::Table(value)).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            ConfigError::at(if path == "." { unknown_key(&inner).unwrap_or(path) } else { path }, inner)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            ofdm: self.ofdm.clone(),
            channel: self.channel.clone(),
            scenario: self.scenario.clone(),
            sensing: self.sensing.clone(),
            reward: self.reward,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |section: &str, e: &dyn std::fmt::Display| {
            let msg = e.to_string();
            ConfigError::at(section_key(section, &msg), msg)
        };
        self.ofdm.validate().map_err(|e| fail("ofdm", &e))?;
        self.channel.validate().map_err(|e| fail("channel", &e))?;
        self.reward.validate().map_err(|e| fail("reward", &e))?;
        let phy = uwacr::Phy::new(self.ofdm.clone()).map_err(|e| fail("ofdm", &e))?;
        self.sensing.validate(phy.rb_map(), self.ofdm.n_fft).map_err(|e| fail("sensing", &e))?;
        self.env().validate().map_err(|e| fail("scenario", &e))?;
        self.agent.validate().map_err(|e| fail("agent", &e))?;
        let b = &self.bench;
        if b.snr_db.is_empty() {
            return Err(ConfigError::at("bench.snr_db", "the SNR grid is empty"));
        }
        if let Some(i) = b.snr_db.iter().position(|v| !v.is_finite()) {
            return Err(ConfigError::at(format!("bench.snr_db[{i}]"), "must be finite"));
        }
        if b.policies.is_empty() {
            return Err(ConfigError::at("bench.policies", "at least one policy is required"));
        }
        if b.curve_window == 0 {
            return Err(ConfigError::at("bench.curve_window", "must be at least 1"));
        }
        for (key, eps) in [("bench.cqi_epsilon", b.cqi_epsilon), ("bench.ed_epsilon", b.ed_epsilon)] {
            if let Some(e) = eps {
                if !(0.0..1.0).contains(&e) {
                    return Err(ConfigError::at(key, format!("{e} is outside [0, 1)")));
                }
            }
        }
        b.calibration.validate().map_err(|e| ConfigError::at("bench.calibration", e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 over the canonical JSON of the resolved configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Pulls a dotted `section.key` out of a validation message.
fn key_in(message: &str) -> Option<String> {
    message
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .find(|w| {
            w.contains('.')
                && w.chars().next().is_some_and(|c| c.is_ascii_lowercase())
                && w.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        })
        .map(str::to_string)
}

/// The dotted key a validation message names, else `section.<leading word>`
/// when the message opens with a field name, else the section itself.
fn section_key(section: &str, message: &str) -> String {
    if let Some(k) = key_in(message) {
        return k;
    }
    let body = message.rsplit(": ").next().unwrap_or(message);
    match body.split_whitespace().next() {
        Some(w) if w.contains('_') && w.chars().all(|c| c.is_ascii_lowercase() || c == '_' || c.is_ascii_digit()) => {
            format!("{section}.{w}")
        }
        _ => section.to_string(),
    }
}

fn unknown_key(message: &str) -> Option<String> {
    let start = message.find("unknown field `")? + "unknown field `".len();
    let end = message[start..].find('`')? + start;
    Some(message[start..end].to_string())
}
