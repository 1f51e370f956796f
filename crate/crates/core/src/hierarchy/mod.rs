//! Two-timescale orchestration: agent placement, the episode loop, remote
//! signaling accounting and convergence detection.

pub mod gateway;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::features::{self, FeatureError, FeatureVector};
use crate::kpi::{estimate, survival_filter};
use crate::learn::{Agent, LearnError, StepKind, Transition};
use crate::netsim::{SimError, Simulator, WindowMeasurements};
use crate::rewards::{self, RewardError};
use crate::scalar::rational_from_f64;

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("placement does not fit the framework: {0}")]
    Placement(String),
    #[error("step counts: {0}")]
    Steps(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Framework {
    FlatRl,
    Hrl,
    FixedBaseline,
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FlatRl => "flat_rl",
            Self::Hrl => "hrl",
            Self::FixedBaseline => "fixed_baseline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Remote,
    Colocated(usize),
}

/// Where each decision maker runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPlacement {
    pub framework: Framework,
    /// `(agent name, placement)`.
    pub agents: Vec<(String, Placement)>,
}

impl AgentPlacement {
    /// The standard layout: one remote agent for flat RL; a remote high-level
    /// agent plus one co-located agent per gNB for HRL; nothing for the baseline.
    pub fn standard(framework: Framework, n_gnbs: usize) -> Self {
        let agents = match framework {
            Framework::FlatRl => vec![("flat".to_string(), Placement::Remote)],
            Framework::Hrl => std::iter::once(("high".to_string(), Placement::Remote))
                .chain((0..n_gnbs).map(|b| (format!("low{b}"), Placement::Colocated(b))))
                .collect(),
            Framework::FixedBaseline => Vec::new(),
        };
        Self { framework, agents }
    }

    pub fn validate(&self, n_gnbs: usize) -> Result<(), HierarchyError> {
        let remote = self.agents.iter().filter(|a| a.1 == Placement::Remote).count();
        let mut colocated: Vec<usize> = self
            .agents
            .iter()
            .filter_map(|a| match a.1 {
                Placement::Colocated(b) => Some(b),
                Placement::Remote => None,
            })
            .collect();
        colocated.sort_unstable();
        let ok = match self.framework {
            Framework::FlatRl => remote == 1 && colocated.is_empty(),
            Framework::Hrl => remote == 1 && colocated == (0..n_gnbs).collect::<Vec<_>>(),
            Framework::FixedBaseline => self.agents.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(HierarchyError::Placement(format!("{} with {:?}", self.framework, self.agents)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Training,
    Evaluation,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Training => "training",
            Self::Evaluation => "evaluation",
        })
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "training" => Ok(Self::Training),
            "evaluation" => Ok(Self::Evaluation),
            _ => Err(format!("unknown phase {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// gNB site to remote agent (state and reward report).
    ToAgent,
    /// Remote agent to gNB site (action).
    ToGnb,
}

/// Remote agent <-> gNB-site message counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalLedger {
    counts: BTreeMap<(Direction, String, Phase), u64>,
    /// Frames carried by the wire gateway (hello, reset, bye included); kept apart
    /// from the gNB-site signal count.
    pub wire_frames: u64,
    pub convergence_step: Option<usize>,
}

impl SignalLedger {
    pub fn record(&mut self, direction: Direction, agent: &str, phase: Phase, n: u64) {
        *self.counts.entry((direction, agent.to_string(), phase)).or_default() += n;
    }

    /// One remote decision: every gNB reports once and receives one action.
    pub fn remote_round(&mut self, agent: &str, phase: Phase, n_gnbs: usize) {
        self.record(Direction::ToAgent, agent, phase, n_gnbs as u64);
        self.record(Direction::ToGnb, agent, phase, n_gnbs as u64);
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn total_phase(&self, phase: Phase) -> u64 {
        self.counts.iter().filter(|(k, _)| k.2 == phase).map(|(_, v)| v).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Direction, String, Phase), &u64)> {
        self.counts.iter()
    }

    pub fn merge(&mut self, other: &SignalLedger) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += v;
        }
        self.wire_frames += other.wire_frames;
    }
}

/// Closed-form remote message count over `n_low` low-level steps.
pub fn count_signals(framework: Framework, n_low: u64, c: u64, n_gnbs: u64) -> Result<u64, HierarchyError> {
    if c == 0 || n_low % c != 0 {
        return Err(HierarchyError::Steps(format!("{n_low} low-level steps are not a multiple of c = {c}")));
    }
    Ok(match framework {
        Framework::FlatRl => 2 * n_gnbs * n_low,
        Framework::Hrl => 2 * n_gnbs * (n_low / c),
        Framework::FixedBaseline => 0,
    })
}

/// Moving-average plateau rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceDetector {
    pub window: usize,
    pub epsilon: f64,
    pub patience: usize,
}

impl Default for ConvergenceDetector {
    fn default() -> Self {
        Self { window: 20, epsilon: 0.01, patience: 3 }
    }
}

impl ConvergenceDetector {
    /// Number of observed iterations at which the rule first fires.
    ///
    /// With `MA(t)` the mean of `series[t-w..t]`, iteration `t >= 2w` passes when
    /// `|MA(t) - MA(t-w)| < epsilon`; the rule fires after `patience` consecutive passes.
    pub fn detect(&self, series: &[f64]) -> Option<usize> {
        let w = self.window.max(1);
        let ma = |t: usize| series[t - w..t].iter().sum::<f64>() / w as f64;
        let mut streak = 0;
        for t in 2 * w..=series.len() {
            if (ma(t) - ma(t - w)).abs() < self.epsilon {
                streak += 1;
                if streak >= self.patience.max(1) {
                    return Some(t);
                }
            } else {
                streak = 0;
            }
        }
        None
    }
}

/// Decision makers of one framework.
pub enum Controllers {
    Fixed { powers: Vec<f64>, retx: Vec<u32> },
    Flat { agent: Box<dyn Agent> },
    Hierarchical { high: Box<dyn Agent>, low: Vec<Box<dyn Agent>> },
}

impl fmt::Debug for Controllers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed { powers, retx } => f.debug_struct("Fixed").field("powers", powers).field("retx", retx).finish(),
            Self::Flat { .. } => f.write_str("Flat"),
            Self::Hierarchical { low, .. } => write!(f, "Hierarchical({} low)", low.len()),
        }
    }
}

impl Controllers {
    pub fn framework(&self) -> Framework {
        match self {
            Self::Fixed { .. } => Framework::FixedBaseline,
            Self::Flat { .. } => Framework::FlatRl,
            Self::Hierarchical { .. } => Framework::Hrl,
        }
    }

    /// Maximum power and maximum transmissions everywhere.
    pub fn max_baseline(cfg: &ScenarioConfig) -> Self {
        let n = cfg.n_devices();
        Self::Fixed {
            powers: vec![*cfg.power_levels_w.last().expect("validated"); n],
            retx: vec![*cfg.retx_levels.last().expect("validated"); n],
        }
    }

    pub fn agents(&self) -> Vec<&dyn Agent> {
        match self {
            Self::Fixed { .. } => Vec::new(),
            Self::Flat { agent } => vec![agent.as_ref()],
            Self::Hierarchical { high, low } => std::iter::once(high.as_ref()).chain(low.iter().map(|a| a.as_ref())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMode {
    pub phase: Phase,
    pub explore: bool,
    pub learn: bool,
}

impl EpisodeMode {
    pub fn training() -> Self {
        Self { phase: Phase::Training, explore: true, learn: true }
    }

    pub fn evaluation() -> Self {
        Self { phase: Phase::Evaluation, explore: false, learn: false }
    }
}

/// One agent decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub step: usize,
    pub agent: String,
    /// Reward for the previous interval; absent on the first decision.
    pub reward: Option<f64>,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub framework: Framework,
    pub seed: u64,
    pub decisions: Vec<Decision>,
    pub low_interactions: usize,
    pub high_interactions: usize,
    /// Global reward of every low-level window.
    pub step_rewards: Vec<f64>,
    /// `(availability, crossing rate)` of every device over the whole episode.
    pub device_kpis: Vec<(f64, f64)>,
    pub ledger: SignalLedger,
}

impl EpisodeLog {
    pub fn mean_step_reward(&self) -> f64 {
        if self.step_rewards.is_empty() {
            0.0
        } else {
            self.step_rewards.iter().sum::<f64>() / self.step_rewards.len() as f64
        }
    }

    /// `step,agent,reward,action...` with one trailing column per action value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HierarchyError> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let to_io = |e: csv::Error| HierarchyError::Io(std::io::Error::other(e));
        w.write_record(["step", "agent", "reward", "action"]).map_err(to_io)?;
        for d in &self.decisions {
            let mut row = vec![d.step.to_string(), d.agent.clone(), d.reward.map(|r| r.to_string()).unwrap_or_default()];
            row.extend(d.action.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Pending {
    state: Vec<f64>,
    action: Vec<usize>,
}

/// Store the transition closing `pending` and train.
fn close(
    agent: &mut dyn Agent,
    pending: &mut Option<Pending>,
    reward: f64,
    next: &[f64],
    learn: bool,
) -> Result<(), HierarchyError> {
    if let Some(p) = pending.take() {
        agent.observe(Transition { state: p.state, action: p.action, reward, next_state: next.to_vec(), kind: StepKind::Continuing });
        if learn && agent.learns() {
            agent.train()?;
        }
    }
    Ok(())
}

fn joint_state(windows: &[WindowMeasurements], cfg: &ScenarioConfig) -> Result<Vec<f64>, HierarchyError> {
    let mut v = Vec::with_capacity(features::DEVICE_WIDTH * cfg.n_devices());
    for m in windows {
        v.extend(features::assemble_low(m, &cfg.norm)?.values);
    }
    Ok(v)
}

fn global_reward(windows: &[WindowMeasurements], cfg: &ScenarioConfig) -> Result<f64, HierarchyError> {
    let kpis: Vec<_> = windows.iter().map(WindowMeasurements::kpis).collect();
    Ok(rewards::reward_high(&kpis, &cfg.reward)?)
}

/// Run one episode on a fresh simulator.
pub fn run_episode(
    controllers: &mut Controllers,
    placement: &AgentPlacement,
    sim: &mut Simulator,
    mode: EpisodeMode,
) -> Result<EpisodeLog, HierarchyError> {
    let cfg = sim.config().clone();
    let b_count = cfg.n_gnbs;
    placement.validate(b_count)?;
    if placement.framework != controllers.framework() {
        return Err(HierarchyError::Placement(format!(
            "placement is {} but controllers are {}",
            placement.framework,
            controllers.framework()
        )));
    }
    let c = cfg.timescale_ratio;
    let n_low = cfg.low_steps_per_episode();
    if c == 0 || n_low % c != 0 {
        return Err(HierarchyError::Steps(format!("{n_low} low-level steps per episode, c = {c}")));
    }
    let remote = |name: &str| placement.agents.iter().any(|(n, p)| n == name && *p == Placement::Remote);

    let mut log = EpisodeLog {
        framework: controllers.framework(),
        seed: cfg.rng_seed,
        decisions: Vec::new(),
        low_interactions: 0,
        high_interactions: 0,
        step_rewards: Vec::with_capacity(n_low),
        device_kpis: Vec::new(),
        ledger: SignalLedger::default(),
    };

    let probe = sim.observe_probe();
    let mut last: Vec<WindowMeasurements> = probe.clone();
    let mut recent: Vec<Vec<WindowMeasurements>> = Vec::with_capacity(c);
    let mut flat_pending: Option<Pending> = None;
    let mut high_pending: Option<Pending> = None;
    let mut low_pending: Vec<Option<Pending>> = (0..b_count).map(|_| None).collect();
    let mut first_low = true;

    for k in 0..n_low {
        match controllers {
            Controllers::Fixed { powers, retx } => {
                sim.apply_high_action(powers)?;
                for b in 0..b_count {
                    let first = cfg.first_device(b);
                    sim.apply_low_action(b, &retx[first..first + cfg.devices_per_gnb[b]])?;
                }
            }
            Controllers::Flat { agent } => {
                let state = joint_state(&last, &cfg)?;
                let reward = if first_low { None } else { Some(global_reward(&last, &cfg)?) };
                if let Some(r) = reward {
                    close(agent.as_mut(), &mut flat_pending, r, &state, mode.learn)?;
                }
                let a = agent.act(&state, mode.explore)?;
                let values = agent.heads().values(&a);
                let n = cfg.n_devices();
                sim.apply_high_action(&values[..n])?;
                for b in 0..b_count {
                    let first = cfg.first_device(b);
                    let retx: Vec<u32> = values[n + first..n + first + cfg.devices_per_gnb[b]].iter().map(|&v| v as u32).collect();
                    sim.apply_low_action(b, &retx)?;
                }
                if remote("flat") {
                    log.ledger.remote_round("flat", mode.phase, b_count);
                }
                log.decisions.push(Decision { step: k, agent: "flat".into(), reward, action: values });
                log.low_interactions += 1;
                flat_pending = Some(Pending { state, action: a });
            }
            Controllers::Hierarchical { high, low } => {
                if k % c == 0 {
                    let (state, reward) = if k == 0 {
                        (joint_state(&probe, &cfg)?, None)
                    } else {
                        let merged = features::merge_windows(&recent, c)?;
                        let state: FeatureVector = features::assemble_high(&recent, c, &cfg.norm)?;
                        (state.values, Some(global_reward(&merged, &cfg)?))
                    };
                    if let Some(r) = reward {
                        close(high.as_mut(), &mut high_pending, r, &state, mode.learn)?;
                    }
                    let a = high.act(&state, mode.explore)?;
                    let values = high.heads().values(&a);
                    sim.apply_high_action(&values)?;
                    if remote("high") {
                        log.ledger.remote_round("high", mode.phase, b_count);
                    }
                    log.decisions.push(Decision { step: k, agent: "high".into(), reward, action: values });
                    log.high_interactions += 1;
                    high_pending = Some(Pending { state, action: a });
                    recent.clear();
                }
                for (b, agent) in low.iter_mut().enumerate() {
                    let state = features::assemble_low(&last[b], &cfg.norm)?.values;
                    let reward = if first_low { None } else { Some(rewards::reward(&last[b].kpis(), &cfg.reward)?) };
                    if let Some(r) = reward {
                        close(agent.as_mut(), &mut low_pending[b], r, &state, mode.learn)?;
                    }
                    let a = agent.act(&state, mode.explore)?;
                    let values = agent.heads().values(&a);
                    let retx: Vec<u32> = values.iter().map(|&v| v as u32).collect();
                    sim.apply_low_action(b, &retx)?;
                    let name = format!("low{b}");
                    if remote(&name) {
                        log.ledger.remote_round(&name, mode.phase, b_count);
                    }
                    log.decisions.push(Decision { step: k, agent: name, reward, action: values });
                    low_pending[b] = Some(Pending { state, action: a });
                }
                log.low_interactions += 1;
            }
        }
        last = sim.run_window();
        log.step_rewards.push(global_reward(&last, &cfg)?);
        recent.push(last.clone());
        first_low = false;
    }

    // close the final intervals; the episode ends on a time limit, so bootstrap
    match controllers {
        Controllers::Fixed { .. } => {}
        Controllers::Flat { agent } => {
            let state = joint_state(&last, &cfg)?;
            close(agent.as_mut(), &mut flat_pending, global_reward(&last, &cfg)?, &state, mode.learn)?;
            agent.end_episode()?;
        }
        Controllers::Hierarchical { high, low } => {
            for (b, agent) in low.iter_mut().enumerate() {
                let state = features::assemble_low(&last[b], &cfg.norm)?.values;
                let r = rewards::reward(&last[b].kpis(), &cfg.reward)?;
                close(agent.as_mut(), &mut low_pending[b], r, &state, mode.learn)?;
                agent.end_episode()?;
            }
            let merged = features::merge_windows(&recent, c)?;
            let state = features::assemble_high(&recent, c, &cfg.norm)?.values;
            close(high.as_mut(), &mut high_pending, global_reward(&merged, &cfg)?, &state, mode.learn)?;
            high.end_episode()?;
        }
    }

    let ts = rational_from_f64(cfg.survival_time_s).expect("validated");
    for u in 0..sim.n_devices() {
        let z = survival_filter(&sim.y_trace(u), ts).expect("simulator traces are valid");
        let e = estimate(&z, z.full_window().expect("nonempty episode")).expect("full window").to_f64();
        log.device_kpis.push((e.availability, e.crossing_rate));
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{BranchingHead, FixedPolicy};

    #[test]
    fn closed_form_counts() {
        assert_eq!(count_signals(Framework::FlatRl, 1000, 5, 2).unwrap(), 4000);
        assert_eq!(count_signals(Framework::Hrl, 1000, 5, 2).unwrap(), 800);
        assert_eq!(count_signals(Framework::FlatRl, 1000, 1, 2).unwrap(), count_signals(Framework::Hrl, 1000, 1, 2).unwrap());
        assert!(count_signals(Framework::Hrl, 1001, 5, 2).is_err());
        assert_eq!(count_signals(Framework::FixedBaseline, 1000, 5, 2).unwrap(), 0);
    }

    #[test]
    fn convergence_rule() {
        let d = ConvergenceDetector { window: 4, epsilon: 0.01, patience: 3 };
        assert_eq!(d.detect(&[0.5; 40]), Some(2 * 4 + 3 - 1));
        assert_eq!(d.detect(&[0.5; 9]), None);
        let ramp: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        assert_eq!(d.detect(&ramp), None);
    }

    #[test]
    fn plateau_detected_soon_after_onset() {
        let d = ConvergenceDetector::default();
        let onset = 60;
        let series: Vec<f64> = (0..300)
            .map(|i| {
                let noise = ((i * 7919) % 13) as f64 / 13.0 * 0.004 - 0.002;
                (if i < onset { i as f64 * 0.02 } else { onset as f64 * 0.02 }) + noise
            })
            .collect();
        let t = d.detect(&series).unwrap();
        assert!(t >= onset && t <= onset + 2 * d.window + d.patience, "{t}");
    }

    #[test]
    fn placement_validation() {
        for f in [Framework::FlatRl, Framework::Hrl, Framework::FixedBaseline] {
            AgentPlacement::standard(f, 2).validate(2).unwrap();
        }
        let mut p = AgentPlacement::standard(Framework::Hrl, 2);
        p.agents[1].1 = Placement::Remote;
        assert!(p.validate(2).is_err());
        let mut p = AgentPlacement::standard(Framework::FlatRl, 2);
        p.agents.push(("x".into(), Placement::Remote));
        assert!(p.validate(2).is_err());
    }

    fn short_cfg() -> ScenarioConfig {
        ScenarioConfig { episode_s: 1.0, rng_seed: 3, ..ScenarioConfig::default() }
    }

    #[test]
    fn baseline_makes_no_calls() {
        let cfg = short_cfg();
        let mut sim = Simulator::new(&cfg).unwrap();
        let mut ctl = Controllers::max_baseline(&cfg);
        let log = run_episode(&mut ctl, &AgentPlacement::standard(Framework::FixedBaseline, 2), &mut sim, EpisodeMode::training())
            .unwrap();
        assert_eq!(log.ledger.total(), 0);
        assert!(log.decisions.is_empty());
        assert_eq!(log.step_rewards.len(), 10);
        assert_eq!(sim.device_state(0).current_power_w, 0.02);
        assert_eq!(sim.device_state(0).current_max_tx, 2);
    }

    #[test]
    fn mismatched_placement_is_rejected() {
        let cfg = short_cfg();
        let mut sim = Simulator::new(&cfg).unwrap();
        let mut ctl = Controllers::max_baseline(&cfg);
        let r = run_episode(&mut ctl, &AgentPlacement::standard(Framework::Hrl, 2), &mut sim, EpisodeMode::training());
        assert!(matches!(r, Err(HierarchyError::Placement(_))));
    }

    fn fixed_hrl(cfg: &ScenarioConfig, powers: Vec<usize>, retx: Vec<usize>) -> Controllers {
        let n = cfg.n_devices();
        let high = FixedPolicy::new(BranchingHead::uniform(n, &cfg.power_levels_w).unwrap(), powers).unwrap();
        let levels: Vec<f64> = cfg.retx_levels.iter().map(|&r| r as f64).collect();
        let low = (0..cfg.n_gnbs)
            .map(|b| {
                let nb = cfg.devices_per_gnb[b];
                let f = cfg.first_device(b);
                Box::new(FixedPolicy::new(BranchingHead::uniform(nb, &levels).unwrap(), retx[f..f + nb].to_vec()).unwrap())
                    as Box<dyn Agent>
            })
            .collect();
        Controllers::Hierarchical { high: Box::new(high), low }
    }

    #[test]
    fn fixed_hrl_matches_manual_drive() {
        let cfg = short_cfg();
        let powers = vec![1, 0, 1, 1, 0, 0, 1, 1, 0, 1];
        let retx = vec![1, 1, 0, 1, 0, 1, 1, 0, 1, 1];
        let mut ctl = fixed_hrl(&cfg, powers.clone(), retx.clone());
        let mut sim = Simulator::new(&cfg).unwrap();
        let log = run_episode(&mut ctl, &AgentPlacement::standard(Framework::Hrl, 2), &mut sim, EpisodeMode::training()).unwrap();
        assert_eq!((log.low_interactions, log.high_interactions), (10, 2));
        assert_eq!(log.ledger.total(), count_signals(Framework::Hrl, 10, 5, 2).unwrap());

        let mut manual = Simulator::new(&cfg).unwrap();
        let p: Vec<f64> = powers.iter().map(|&i| cfg.power_levels_w[i]).collect();
        let r: Vec<u32> = retx.iter().map(|&i| cfg.retx_levels[i]).collect();
        for _ in 0..10 {
            manual.apply_high_action(&p).unwrap();
            manual.apply_low_action(0, &r[..5]).unwrap();
            manual.apply_low_action(1, &r[5..]).unwrap();
            manual.run_window();
        }
        for u in 0..10 {
            assert_eq!(manual.y_trace(u), sim.y_trace(u));
        }
    }

    #[test]
    fn episode_csv_has_action_columns() {
        let cfg = short_cfg();
        let mut ctl = fixed_hrl(&cfg, vec![1; 10], vec![1; 10]);
        let mut sim = Simulator::new(&cfg).unwrap();
        let log = run_episode(&mut ctl, &AgentPlacement::standard(Framework::Hrl, 2), &mut sim, EpisodeMode::evaluation()).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,agent,reward,action"));
        assert_eq!(lines.next(), Some("0,high,,0.02,0.02,0.02,0.02,0.02,0.02,0.02,0.02,0.02,0.02"));
        assert_eq!(lines.next(), Some("0,low0,,2,2,2,2,2"));
        assert_eq!(log.ledger.total_phase(Phase::Evaluation), 8);
    }
}
