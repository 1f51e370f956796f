//! Scenario configuration: a flat `key=value` text file.
//!
//! Every field has a default; a file only needs the keys it overrides. Units are
//! part of the key names (`delay_bound_s`, `noise_power_w`, ...). Lines starting
//! with `#` are comments. [`ScenarioConfig::to_text`] materializes every key.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::channel::{FloorPlan, RadioConfig};
use crate::features::NormalizationSpec;
use crate::learn::AgentHyperparams;
use crate::rewards::{RewardConfig, RewardMode};
use crate::scalar::{rational_from_f64, Rational};

/// One offending key and why.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid scenario config: {}", .issues.iter().map(|i| format!("{}: {}", i.key, i.message)).collect::<Vec<_>>().join("; "))]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    fn single(key: &str, message: impl Into<String>) -> Self {
        Self { issues: vec![ConfigIssue { key: key.into(), message: message.into() }] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainSource {
    /// Synthetic floor plan, frozen for the episode.
    Static,
    /// CSV file given by `gain_file`.
    Ingested,
    /// Synthetic floor plan evolved as log-domain AR(1).
    GaussMarkov,
}

impl FromStr for GainSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" => Ok(Self::Static),
            "ingested" => Ok(Self::Ingested),
            "gauss_markov" => Ok(Self::GaussMarkov),
            _ => Err(format!("expected static|ingested|gauss_markov, got {s:?}")),
        }
    }
}

impl fmt::Display for GainSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Static => "static",
            Self::Ingested => "ingested",
            Self::GaussMarkov => "gauss_markov",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSettings {
    pub source: GainSource,
    /// Seeds the synthetic geometry and shadowing (independent of the run seed).
    pub channel_seed: u64,
    pub gain_file: Option<PathBuf>,
    pub gain_update_period_s: f64,
    pub gm_sigma_db: f64,
    pub gm_tau_s: f64,
    pub plan: FloorPlan,
}

impl Default for ChannelSettings {
    fn default() -> Self {
        Self {
            source: GainSource::Static,
            channel_seed: 26,
            gain_file: None,
            gain_update_period_s: 0.01,
            gm_sigma_db: 2.0,
            gm_tau_s: 0.5,
            plan: FloorPlan::default(),
        }
    }
}

/// Scalar type of the agents' networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            _ => Err(format!("expected f32|f64, got {s:?}")),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::F32 => "f32",
            Self::F64 => "f64",
        })
    }
}

/// Training and evaluation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub precision: Precision,
    pub episode_budget: usize,
    pub eval_episodes: usize,
    pub convergence_window: usize,
    pub convergence_epsilon: f64,
    pub convergence_patience: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            precision: Precision::F32,
            episode_budget: 300,
            eval_episodes: 10,
            convergence_window: 20,
            convergence_epsilon: 0.01,
            convergence_patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_gnbs: usize,
    pub devices_per_gnb: Vec<usize>,
    pub tti_s: f64,
    pub traffic_period_s: f64,
    /// Arrival phase of every device's periodic traffic.
    pub traffic_offset_s: f64,
    /// Extra arrival offset of gNB `b`'s devices: `b * gnb_stagger_s`.
    pub gnb_stagger_s: f64,
    pub delay_bound_s: f64,
    pub survival_time_s: f64,
    pub power_levels_w: Vec<f64>,
    pub retx_levels: Vec<u32>,
    pub episode_s: f64,
    pub low_step_s: f64,
    pub timescale_ratio: usize,
    pub rng_seed: u64,
    /// Extra TTIs between a failed attempt and its retransmission.
    pub harq_feedback_delay_tti: u32,
    /// RB-groups per gNB per TTI; 0 means unlimited.
    pub capacity_per_tti: usize,
    pub radio: RadioConfig,
    pub channel: ChannelSettings,
    pub norm: NormalizationSpec,
    pub reward: RewardConfig,
    pub agent: AgentHyperparams,
    pub experiment: ExperimentSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_gnbs: 2,
            devices_per_gnb: vec![5, 5],
            tti_s: 0.0005,
            traffic_period_s: 0.002,
            traffic_offset_s: 0.0,
            gnb_stagger_s: 0.0,
            delay_bound_s: 0.0025,
            survival_time_s: 0.005,
            power_levels_w: vec![0.008, 0.02],
            retx_levels: vec![1, 2],
            episode_s: 10.0,
            low_step_s: 0.1,
            timescale_ratio: 5,
            rng_seed: 0,
            harq_feedback_delay_tti: 0,
            capacity_per_tti: 0,
            radio: RadioConfig { noise_power_w: 5e-12, ..RadioConfig::default() },
            channel: ChannelSettings::default(),
            norm: NormalizationSpec::default(),
            reward: RewardConfig::default(),
            agent: AgentHyperparams::default(),
            experiment: ExperimentSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigIssue>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| ConfigIssue { key: key.into(), message: format!("{v:?}: {e}") })
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigIssue>
where
    T::Err: fmt::Display,
{
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ScenarioConfig {
    pub fn n_devices(&self) -> usize {
        self.devices_per_gnb.iter().sum()
    }

    /// Global index of the first device of each gNB.
    pub fn first_device(&self, gnb: usize) -> usize {
        self.devices_per_gnb[..gnb].iter().sum()
    }

    pub fn ttis_per_low_step(&self) -> u64 {
        (self.low_step_s / self.tti_s).round() as u64
    }

    pub fn low_steps_per_episode(&self) -> usize {
        (self.episode_s / self.low_step_s).round() as usize
    }

    pub fn high_step_s(&self) -> f64 {
        self.low_step_s * self.timescale_ratio as f64
    }

    pub fn tti(&self) -> Rational {
        rational_from_f64(self.tti_s).expect("validated")
    }

    /// Parse a config file body on top of the defaults, then validate.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut issues = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                issues.push(ConfigIssue { key: format!("line {}", lineno + 1), message: "expected key=value".into() });
                continue;
            };
            if let Err(issue) = cfg.set(k.trim(), v.trim()) {
                issues.push(issue);
            }
        }
        if !issues.is_empty() {
            return Err(ConfigError { issues });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigIssue> {
        let k = key;
        match k {
            "n_gnbs" => self.n_gnbs = parse(k, v)?,
            "devices_per_gnb" => self.devices_per_gnb = parse_list(k, v)?,
            "tti_s" => self.tti_s = parse(k, v)?,
            "traffic_period_s" => self.traffic_period_s = parse(k, v)?,
            "traffic_offset_s" => self.traffic_offset_s = parse(k, v)?,
            "gnb_stagger_s" => self.gnb_stagger_s = parse(k, v)?,
            "delay_bound_s" => self.delay_bound_s = parse(k, v)?,
            "survival_time_s" => self.survival_time_s = parse(k, v)?,
            "power_levels_w" => self.power_levels_w = parse_list(k, v)?,
            "retx_levels" => self.retx_levels = parse_list(k, v)?,
            "episode_s" => self.episode_s = parse(k, v)?,
            "low_step_s" => self.low_step_s = parse(k, v)?,
            "timescale_ratio" => self.timescale_ratio = parse(k, v)?,
            "rng_seed" => self.rng_seed = parse(k, v)?,
            "harq_feedback_delay_tti" => self.harq_feedback_delay_tti = parse(k, v)?,
            "capacity_per_tti" => self.capacity_per_tti = parse(k, v)?,
            "noise_power_w" => self.radio.noise_power_w = parse(k, v)?,
            "carrier_ghz" => self.radio.carrier_ghz = parse(k, v)?,
            "bandwidth_mhz" => self.radio.bandwidth_mhz = parse(k, v)?,
            "bler_midpoint_db" => self.radio.bler_midpoint_db = parse(k, v)?,
            "bler_slope_per_db" => self.radio.bler_slope = parse(k, v)?,
            "harq_combining_gain_db" => self.radio.harq_combining_gain_db = parse(k, v)?,
            "channel_mode" => self.channel.source = parse(k, v)?,
            "channel_seed" => self.channel.channel_seed = parse(k, v)?,
            "gain_file" => self.channel.gain_file = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "gain_update_period_s" => self.channel.gain_update_period_s = parse(k, v)?,
            "gm_sigma_db" => self.channel.gm_sigma_db = parse(k, v)?,
            "gm_tau_s" => self.channel.gm_tau_s = parse(k, v)?,
            "floor_length_m" => self.channel.plan.length_m = parse(k, v)?,
            "floor_width_m" => self.channel.plan.width_m = parse(k, v)?,
            "gnb_height_m" => self.channel.plan.gnb_height_m = parse(k, v)?,
            "device_height_m" => self.channel.plan.device_height_m = parse(k, v)?,
            "pathloss_intercept_db" => self.channel.plan.pathloss_intercept_db = parse(k, v)?,
            "pathloss_exponent" => self.channel.plan.pathloss_exponent = parse(k, v)?,
            "shadowing_db" => self.channel.plan.shadowing_db = parse(k, v)?,
            "omega" => self.reward.omega = parse(k, v)?,
            "eta" => self.reward.eta = parse(k, v)?,
            "reward_mode" => self.reward.mode = parse(k, v)?,
            "discount" => self.agent.discount = parse(k, v)?,
            "learning_rate" => self.agent.learning_rate = parse(k, v)?,
            "batch_size" => self.agent.batch_size = parse(k, v)?,
            "entropy_temperature" => self.agent.temperature = parse(k, v)?,
            "target_update_rate" => self.agent.target_update_rate = parse(k, v)?,
            "replay_capacity" => self.agent.replay_capacity = parse(k, v)?,
            "hidden_units" => self.agent.hidden = parse_list(k, v)?,
            "updates_per_step" => self.agent.updates_per_step = parse(k, v)?,
            "agent_precision" => self.experiment.precision = parse(k, v)?,
            "episode_budget" => self.experiment.episode_budget = parse(k, v)?,
            "eval_episodes" => self.experiment.eval_episodes = parse(k, v)?,
            "convergence_window" => self.experiment.convergence_window = parse(k, v)?,
            "convergence_epsilon" => self.experiment.convergence_epsilon = parse(k, v)?,
            "convergence_patience" => self.experiment.convergence_patience = parse(k, v)?,
            _ => {
                if let Some(rest) = k.strip_prefix("feat_") {
                    return self.norm.set(rest, v).map_err(|message| ConfigIssue { key: k.into(), message });
                }
                return Err(ConfigIssue { key: k.into(), message: "unknown key".into() });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |key: &str, msg: &str| issues.push(ConfigIssue { key: key.into(), message: msg.into() });
        if self.n_gnbs == 0 {
            bad("n_gnbs", "must be >= 1");
        }
        if self.devices_per_gnb.len() != self.n_gnbs {
            bad("devices_per_gnb", "needs one entry per gNB");
        }
        if self.devices_per_gnb.iter().any(|&n| n == 0) {
            bad("devices_per_gnb", "every gNB needs >= 1 device");
        }
        let dur = |v: f64| rational_from_f64(v);
        let tti = dur(self.tti_s).filter(|t| *t > Rational::from_integer(0));
        if tti.is_none() {
            bad("tti_s", "must be a positive duration");
        }
        if !(self.traffic_period_s > 0.0) {
            bad("traffic_period_s", "must be > 0");
        }
        if !(self.traffic_offset_s >= 0.0) {
            bad("traffic_offset_s", "must be >= 0");
        }
        if !(self.gnb_stagger_s >= 0.0) {
            bad("gnb_stagger_s", "must be >= 0");
        }
        if !(self.survival_time_s >= 0.0) {
            bad("survival_time_s", "must be >= 0");
        }
        if !(self.delay_bound_s >= self.tti_s) {
            bad("delay_bound_s", "must be >= tti_s");
        }
        let strictly_sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.power_levels_w.is_empty() || !strictly_sorted(&self.power_levels_w) {
            bad("power_levels_w", "must be nonempty and strictly increasing");
        }
        if self.power_levels_w.iter().any(|&p| !(p > 0.0)) {
            bad("power_levels_w", "levels must be > 0");
        }
        if self.retx_levels.is_empty() || !self.retx_levels.windows(2).all(|w| w[0] < w[1]) {
            bad("retx_levels", "must be nonempty and strictly increasing");
        }
        if self.retx_levels.first() == Some(&0) {
            bad("retx_levels", "maximum transmissions must be >= 1");
        }
        if self.timescale_ratio == 0 {
            bad("timescale_ratio", "must be >= 1");
        }
        let multiple = |a: f64, b: f64| -> bool {
            match (dur(a), dur(b)) {
                (Some(a), Some(b)) if b > Rational::from_integer(0) && a > Rational::from_integer(0) => {
                    (a / b).is_integer()
                }
                _ => false,
            }
        };
        if tti.is_some() && !multiple(self.low_step_s, self.tti_s) {
            bad("low_step_s", "must be a positive multiple of tti_s");
        }
        if self.timescale_ratio > 0 && !multiple(self.episode_s, self.low_step_s * self.timescale_ratio as f64) {
            bad("episode_s", "must be a multiple of timescale_ratio * low_step_s");
        }
        if self.channel.source == GainSource::GaussMarkov && !multiple(self.channel.gain_update_period_s, self.tti_s) {
            bad("gain_update_period_s", "must be a positive multiple of tti_s");
        }
        if self.channel.source == GainSource::Ingested && self.channel.gain_file.is_none() {
            bad("gain_file", "required when channel_mode=ingested");
        }
        if let Err(e) = self.radio.validate() {
            bad("radio", &e.to_string());
        }
        if let Err(e) = self.reward.validate() {
            bad("omega/eta", &e.to_string());
        }
        if let Err(e) = self.agent.validate() {
            bad("agent", &e.to_string());
        }
        for (name, lo, hi) in self.norm.ranges() {
            if !(hi > lo) {
                bad(&format!("feat_{name}_max"), "must exceed the matching _min");
            }
        }
        let e = &self.experiment;
        if e.convergence_window == 0 || !(e.convergence_epsilon > 0.0) {
            bad("convergence_window", "window >= 1 and epsilon > 0 required");
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::single("config", e.to_string()))?;
        Self::from_text(&text)
    }

    /// Every key with its resolved value, in a stable order.
    pub fn to_text(&self) -> String {
        let r = &self.radio;
        let c = &self.channel;
        let p = &c.plan;
        let a = &self.agent;
        let e = &self.experiment;
        let mut lines = vec![
            format!("n_gnbs={}", self.n_gnbs),
            format!("devices_per_gnb={}", join(&self.devices_per_gnb)),
            format!("tti_s={}", self.tti_s),
            format!("traffic_period_s={}", self.traffic_period_s),
            format!("traffic_offset_s={}", self.traffic_offset_s),
            format!("gnb_stagger_s={}", self.gnb_stagger_s),
            format!("delay_bound_s={}", self.delay_bound_s),
            format!("survival_time_s={}", self.survival_time_s),
            format!("power_levels_w={}", join(&self.power_levels_w)),
            format!("retx_levels={}", join(&self.retx_levels)),
            format!("episode_s={}", self.episode_s),
            format!("low_step_s={}", self.low_step_s),
            format!("timescale_ratio={}", self.timescale_ratio),
            format!("rng_seed={}", self.rng_seed),
            format!("harq_feedback_delay_tti={}", self.harq_feedback_delay_tti),
            format!("capacity_per_tti={}", self.capacity_per_tti),
            format!("noise_power_w={}", r.noise_power_w),
            format!("carrier_ghz={}", r.carrier_ghz),
            format!("bandwidth_mhz={}", r.bandwidth_mhz),
            format!("bler_midpoint_db={}", r.bler_midpoint_db),
            format!("bler_slope_per_db={}", r.bler_slope),
            format!("harq_combining_gain_db={}", r.harq_combining_gain_db),
            format!("channel_mode={}", c.source),
            format!("channel_seed={}", c.channel_seed),
            format!("gain_file={}", c.gain_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            format!("gain_update_period_s={}", c.gain_update_period_s),
            format!("gm_sigma_db={}", c.gm_sigma_db),
            format!("gm_tau_s={}", c.gm_tau_s),
            format!("floor_length_m={}", p.length_m),
            format!("floor_width_m={}", p.width_m),
            format!("gnb_height_m={}", p.gnb_height_m),
            format!("device_height_m={}", p.device_height_m),
            format!("pathloss_intercept_db={}", p.pathloss_intercept_db),
            format!("pathloss_exponent={}", p.pathloss_exponent),
            format!("shadowing_db={}", p.shadowing_db),
            format!("omega={}", self.reward.omega),
            format!("eta={}", self.reward.eta),
            format!("reward_mode={}", self.reward.mode),
            format!("discount={}", a.discount),
            format!("learning_rate={}", a.learning_rate),
            format!("batch_size={}", a.batch_size),
            format!("entropy_temperature={}", a.temperature),
            format!("target_update_rate={}", a.target_update_rate),
            format!("replay_capacity={}", a.replay_capacity),
            format!("hidden_units={}", join(&a.hidden)),
            format!("updates_per_step={}", a.updates_per_step),
            format!("agent_precision={}", e.precision),
            format!("episode_budget={}", e.episode_budget),
            format!("eval_episodes={}", e.eval_episodes),
            format!("convergence_window={}", e.convergence_window),
            format!("convergence_epsilon={}", e.convergence_epsilon),
            format!("convergence_patience={}", e.convergence_patience),
        ];
        for (name, lo, hi) in self.norm.ranges() {
            lines.push(format!("feat_{name}_min={lo}"));
            lines.push(format!("feat_{name}_max={hi}"));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    pub fn with_reward_mode(mut self, mode: RewardMode) -> Self {
        self.reward.mode = mode;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_table_values() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!(c.ttis_per_low_step(), 200);
        assert_eq!(c.low_steps_per_episode(), 100);
        assert_eq!(c.high_step_s(), 0.5);
        assert_eq!(c.n_devices(), 10);
        assert_eq!(c.agent.batch_size, 200);
        assert_eq!(c.agent.discount, 0.1);
        assert_eq!(c.agent.learning_rate, 0.0003);
    }

    #[test]
    fn text_round_trip_is_identity() {
        let mut c = ScenarioConfig::default();
        c.rng_seed = 42;
        c.delay_bound_s = 0.003;
        c.reward.mode = RewardMode::Average;
        let back = ScenarioConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_overrides_defaults() {
        let c = ScenarioConfig::from_text("# comment\ndelay_bound_s=0.003\nretx_levels=1,2,3\n").unwrap();
        assert_eq!(c.delay_bound_s, 0.003);
        assert_eq!(c.retx_levels, vec![1, 2, 3]);
        assert_eq!(c.tti_s, 0.0005);
    }

    #[test]
    fn validation_lists_offending_keys() {
        let err = ScenarioConfig::from_text("low_step_s=0.0007\nretx_levels=2,1\nbogus=1\n").unwrap_err();
        let keys: Vec<_> = err.issues.iter().map(|i| i.key.as_str()).collect();
        assert_eq!(keys, ["bogus"]);
        let err = ScenarioConfig::from_text("low_step_s=0.0007\nretx_levels=2,1\nepisode_s=10.05\n").unwrap_err();
        let keys: Vec<_> = err.issues.iter().map(|i| i.key.as_str()).collect();
        assert!(keys.contains(&"low_step_s"));
        assert!(keys.contains(&"retx_levels"));
        assert!(keys.contains(&"episode_s"));
        let err = ScenarioConfig::from_text("delay_bound_s=0.0001\n").unwrap_err();
        assert_eq!(err.issues[0].key, "delay_bound_s");
    }
}
