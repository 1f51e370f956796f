//! Experiment runner: train the five setups, evaluate greedy policies on paired
//! seeds, and write metrics, signaling counts, reward curves and checkpoints.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::Ordering;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, Precision, ScenarioConfig};
use crate::features::{nearest_rank, DEVICE_WIDTH};
use crate::hierarchy::gateway::{Gateway, GatewayError};
use crate::hierarchy::{
    run_episode, AgentPlacement, ConvergenceDetector, Controllers, Direction, EpisodeMode, Framework, HierarchyError,
    Phase, SignalLedger,
};
use crate::kpi::{survival_filter, write_trace_csv};
use crate::learn::{Agent, BranchingHead, LearnError, SacAgent};
use crate::netsim::{build_field, SimError, Simulator};
use crate::rewards::RewardMode;
use crate::scalar::rational_from_f64;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("missing runs: {}", .0.join(", "))]
    MissingRuns(Vec<String>),
    #[error("{0}")]
    Spec(String),
}

impl ExperimentError {
    /// `(key, message)` pairs for machine-readable reporting.
    pub fn issues(&self) -> Vec<(String, String)> {
        match self {
            Self::Config(c) => c.issues.iter().map(|i| (i.key.clone(), i.message.clone())).collect(),
            Self::MissingRuns(r) => r.iter().map(|r| ("run".to_string(), format!("missing {r}"))).collect(),
            Self::File { path, message } => vec![(path.display().to_string(), message.clone())],
            other => vec![(other.kind().to_string(), other.to_string())],
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Hierarchy(_) => "episode",
            Self::Sim(_) => "simulator",
            Self::Learn(_) => "agent",
            Self::Gateway(_) => "gateway",
            Self::File { .. } => "file",
            Self::MissingRuns(_) => "run",
            Self::Spec(_) => "spec",
        }
    }
}

fn file_err(path: &Path, e: impl fmt::Display) -> ExperimentError {
    ExperimentError::File { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setup {
    MaxRetPwr,
    RlAvg,
    RlRiskSen,
    HrlAvg,
    HrlRiskSen,
}

impl Setup {
    pub const ALL: [Setup; 5] = [Self::MaxRetPwr, Self::RlAvg, Self::RlRiskSen, Self::HrlAvg, Self::HrlRiskSen];

    pub fn name(self) -> &'static str {
        match self {
            Self::MaxRetPwr => "MaxRetPwr",
            Self::RlAvg => "RLAvg",
            Self::RlRiskSen => "RLRiskSen",
            Self::HrlAvg => "HRLAvg",
            Self::HrlRiskSen => "HRLRiskSen",
        }
    }

    pub fn framework(self) -> Framework {
        match self {
            Self::MaxRetPwr => Framework::FixedBaseline,
            Self::RlAvg | Self::RlRiskSen => Framework::FlatRl,
            Self::HrlAvg | Self::HrlRiskSen => Framework::Hrl,
        }
    }

    pub fn reward_mode(self) -> Option<RewardMode> {
        match self {
            Self::MaxRetPwr => None,
            Self::RlAvg | Self::HrlAvg => Some(RewardMode::Average),
            Self::RlRiskSen | Self::HrlRiskSen => Some(RewardMode::RiskSensitive),
        }
    }

    pub fn learns(self) -> bool {
        self != Self::MaxRetPwr
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown setup {s:?}; expected maxretpwr|rlavg|rlrisksen|hrlavg|hrlrisksen"))
    }
}

const TRAIN_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;
const AGENT_STREAM: u64 = 3;

/// Deterministic seed number `index` of stream `stream` under `base`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(base);
    r.set_stream(stream);
    r.set_word_pos(2 * index as u128);
    r.next_u64()
}

/// Simulator seed of evaluation episode `j` under experiment seed `seed`; the same
/// for every setup, so setups are compared on paired episodes.
pub fn eval_episode_seed(seed: u64, j: usize) -> u64 {
    derive_seed(seed, EVAL_STREAM, j as u64)
}

pub fn train_episode_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, TRAIN_STREAM, i as u64)
}

/// Initialization seed of agent `i` (0 = flat or high-level, 1 + b = low-level of gNB b).
pub fn agent_seed(seed: u64, i: u64) -> u64 {
    derive_seed(seed, AGENT_STREAM, i)
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub setup: Setup,
    pub seeds: Vec<u64>,
    /// Where to write results; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Serve the remote agent (flat or high-level) through this endpoint.
    pub gateway: Option<String>,
    pub dump_traces: bool,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioConfig, setup: Setup, seeds: Vec<u64>) -> Self {
        Self { scenario, setup, seeds, out_dir: None, gateway: None, dump_traces: false }
    }

    /// Scenario with the setup's reward mode applied.
    pub fn resolved(&self) -> ScenarioConfig {
        match self.setup.reward_mode() {
            Some(m) => self.scenario.clone().with_reward_mode(m),
            None => self.scenario.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.resolved().validate()?;
        if self.seeds.is_empty() {
            return Err(ExperimentError::Spec("seed list is empty".into()));
        }
        Ok(())
    }
}

/// Per-device KPIs of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run: String,
    pub seed: u64,
    pub episode: usize,
    pub device: usize,
    pub availability: f64,
    pub crossing_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    pub train_episodes: usize,
    /// Training episode count at which the reward curve was declared flat.
    pub converged_at: Option<usize>,
    pub train_rewards: Vec<f64>,
    pub eval_rewards: Vec<f64>,
    pub ledger: SignalLedger,
    pub rows: Vec<MetricsRow>,
    pub checkpoints: Vec<(String, String)>,
}

impl SeedReport {
    pub fn mean_availability(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.availability))
    }

    pub fn mean_crossing_rate(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.crossing_rate))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub setup: Setup,
    pub seeds: Vec<SeedReport>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.seeds.iter().flat_map(|s| s.rows.iter())
    }

    pub fn mean_availability(&self) -> f64 {
        mean(self.rows().map(|r| r.availability))
    }

    pub fn mean_crossing_rate(&self) -> f64 {
        mean(self.rows().map(|r| r.crossing_rate))
    }

    pub fn ledger(&self) -> SignalLedger {
        let mut l = SignalLedger::default();
        for s in &self.seeds {
            l.merge(&s.ledger);
        }
        l
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn sac(cfg: &ScenarioConfig, state_len: usize, heads: BranchingHead, seed: u64) -> Result<Box<dyn Agent>, LearnError> {
    Ok(match cfg.experiment.precision {
        Precision::F32 => Box::new(SacAgent::<f32>::new(state_len, heads, cfg.agent.clone(), seed)?),
        Precision::F64 => Box::new(SacAgent::<f64>::new(state_len, heads, cfg.agent.clone(), seed)?),
    })
}

pub fn power_heads(cfg: &ScenarioConfig) -> BranchingHead {
    BranchingHead::uniform(cfg.n_devices(), &cfg.power_levels_w).expect("validated levels")
}

pub fn retx_heads(cfg: &ScenarioConfig, devices: usize) -> BranchingHead {
    let levels: Vec<f64> = cfg.retx_levels.iter().map(|&r| r as f64).collect();
    BranchingHead::uniform(devices, &levels).expect("validated levels")
}

/// Width of the joint all-gNB state.
pub fn joint_state_len(cfg: &ScenarioConfig) -> usize {
    DEVICE_WIDTH * cfg.n_devices()
}

/// Fresh decision makers for one seed. `remote` replaces the flat or high-level agent.
pub fn build_controllers(
    setup: Setup,
    cfg: &ScenarioConfig,
    seed: u64,
    remote: Option<Box<dyn Agent>>,
) -> Result<Controllers, ExperimentError> {
    let agent_seed = |i: u64| agent_seed(seed, i);
    let joint = joint_state_len(cfg);
    Ok(match setup.framework() {
        Framework::FixedBaseline => Controllers::max_baseline(cfg),
        Framework::FlatRl => {
            let heads = power_heads(cfg).join(&retx_heads(cfg, cfg.n_devices()));
            let agent = match remote {
                Some(r) => r,
                None => sac(cfg, joint, heads, agent_seed(0))?,
            };
            Controllers::Flat { agent }
        }
        Framework::Hrl => {
            let high = match remote {
                Some(r) => r,
                None => sac(cfg, joint, power_heads(cfg), agent_seed(0))?,
            };
            let low = (0..cfg.n_gnbs)
                .map(|b| {
                    let n = cfg.devices_per_gnb[b];
                    sac(cfg, DEVICE_WIDTH * n, retx_heads(cfg, n), agent_seed(1 + b as u64))
                })
                .collect::<Result<_, _>>()?;
            Controllers::Hierarchical { high, low }
        }
    })
}

/// Name of the agent a gateway session stands in for.
pub fn remote_agent_name(setup: Setup) -> Option<&'static str> {
    match setup.framework() {
        Framework::FlatRl => Some("flat"),
        Framework::Hrl => Some("high"),
        Framework::FixedBaseline => None,
    }
}

/// Fresh learner for the remote role of `setup`, seeded as the in-process one would be.
pub fn build_remote_learner(setup: Setup, cfg: &ScenarioConfig, seed: u64) -> Result<Option<Box<dyn Agent>>, ExperimentError> {
    match remote_heads(setup, cfg) {
        Some(h) => Ok(Some(sac(cfg, joint_state_len(cfg), h, agent_seed(seed, 0))?)),
        None => Ok(None),
    }
}

/// Heads of the remote agent of a setup.
pub fn remote_heads(setup: Setup, cfg: &ScenarioConfig) -> Option<BranchingHead> {
    match setup.framework() {
        Framework::FlatRl => Some(power_heads(cfg).join(&retx_heads(cfg, cfg.n_devices()))),
        Framework::Hrl => Some(power_heads(cfg)),
        Framework::FixedBaseline => None,
    }
}

/// Train one seed (if the setup learns), then evaluate it.
fn run_seed(
    spec: &ExperimentSpec,
    cfg: &ScenarioConfig,
    seed: u64,
    gateway: Option<&Gateway>,
) -> Result<SeedReport, ExperimentError> {
    let field = build_field(cfg)?;
    let mut frames = None;
    let remote: Option<Box<dyn Agent>> = match (gateway, remote_heads(spec.setup, cfg)) {
        (Some(g), Some(h)) => {
            let agent = g.accept(h)?;
            frames = Some(agent.frame_counter());
            Some(Box::new(agent))
        }
        _ => None,
    };
    let mut controllers = build_controllers(spec.setup, cfg, seed, remote)?;
    let placement = AgentPlacement::standard(spec.setup.framework(), cfg.n_gnbs);
    let mut ledger = SignalLedger::default();
    let ex = &cfg.experiment;
    let detector = ConvergenceDetector {
        window: ex.convergence_window,
        epsilon: ex.convergence_epsilon,
        patience: ex.convergence_patience,
    };

    let mut train_rewards = Vec::new();
    let mut converged_at = None;
    if spec.setup.learns() {
        for i in 0..ex.episode_budget {
            let mut c = cfg.clone();
            c.rng_seed = train_episode_seed(seed, i);
            let mut sim = Simulator::with_field(&c, field.clone())?;
            let log = run_episode(&mut controllers, &placement, &mut sim, EpisodeMode::training())?;
            ledger.merge(&log.ledger);
            train_rewards.push(log.mean_step_reward());
            if let Some(t) = detector.detect(&train_rewards) {
                converged_at = Some(t);
                break;
            }
        }
    }
    ledger.convergence_step = converged_at;

    let mut rows = Vec::new();
    let mut eval_rewards = Vec::new();
    for j in 0..ex.eval_episodes {
        let mut c = cfg.clone();
        c.rng_seed = eval_episode_seed(seed, j);
        let mut sim = Simulator::with_field(&c, field.clone())?;
        let log = run_episode(&mut controllers, &placement, &mut sim, EpisodeMode::evaluation())?;
        ledger.merge(&log.ledger);
        eval_rewards.push(log.mean_step_reward());
        for (u, &(a, psi)) in log.device_kpis.iter().enumerate() {
            rows.push(MetricsRow {
                run: spec.setup.name().to_string(),
                seed,
                episode: j,
                device: u,
                availability: a,
                crossing_rate: psi,
            });
        }
        if spec.dump_traces {
            if let Some(dir) = &spec.out_dir {
                dump_traces(&dir.join("traces"), &sim, seed, j)?;
            }
        }
    }

    let names: Vec<String> = match &controllers {
        Controllers::Fixed { .. } => Vec::new(),
        Controllers::Flat { .. } => vec!["flat".into()],
        Controllers::Hierarchical { low, .. } => {
            std::iter::once("high".to_string()).chain((0..low.len()).map(|b| format!("low{b}"))).collect()
        }
    };
    let checkpoints = names
        .into_iter()
        .zip(controllers.agents())
        .filter_map(|(n, a)| a.checkpoint().map(|c| (n, c)))
        .collect();
    if let Some(f) = frames {
        ledger.wire_frames = f.load(Ordering::Relaxed);
    }
    Ok(SeedReport {
        seed,
        train_episodes: train_rewards.len(),
        converged_at,
        train_rewards,
        eval_rewards,
        ledger,
        rows,
        checkpoints,
    })
}

fn dump_traces(dir: &Path, sim: &Simulator, seed: u64, episode: usize) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    let ts = rational_from_f64(sim.config().survival_time_s).expect("validated");
    for u in 0..sim.n_devices() {
        let y = sim.y_trace(u);
        let z = survival_filter(&y, ts).map_err(|e| ExperimentError::Spec(e.to_string()))?;
        for (tag, sig) in [("y", &y), ("z", &z)] {
            let path = dir.join(format!("seed{seed}_ep{episode}_dev{u}_{tag}.csv"));
            let f = fs::File::create(&path).map_err(|e| file_err(&path, e))?;
            write_trace_csv(sig, std::io::BufWriter::new(f)).map_err(|e| file_err(&path, e))?;
        }
    }
    Ok(())
}

/// Train and evaluate every seed of `spec`; write result files when an output
/// directory is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let cfg = spec.resolved();
    let gateway = match (&spec.gateway, spec.setup.learns()) {
        (Some(addr), true) => Some(Gateway::bind(addr.as_str())?),
        _ => None,
    };
    let mut seeds = Vec::with_capacity(spec.seeds.len());
    for &s in &spec.seeds {
        seeds.push(run_seed(spec, &cfg, s, gateway.as_ref())?);
    }
    let report = ExperimentReport { setup: spec.setup, seeds };
    if let Some(dir) = &spec.out_dir {
        write_report(dir, &cfg, &report)?;
    }
    Ok(report)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, ExperimentError> {
    csv::Writer::from_path(path).map_err(|e| file_err(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), ExperimentError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| file_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| file_err(path, e))?;
    }
    w.flush().map_err(|e| file_err(path, e))
}

fn write_report(dir: &Path, cfg: &ScenarioConfig, report: &ExperimentReport) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    let p = dir.join("resolved_config.txt");
    fs::write(&p, cfg.to_text()).map_err(|e| file_err(&p, e))?;

    write_rows(
        &dir.join("metrics.csv"),
        &["run", "seed", "episode", "device", "availability", "crossing_rate"],
        report.rows().map(|r| {
            [r.run.clone(), r.seed.to_string(), r.episode.to_string(), r.device.to_string(), r.availability.to_string(), r.crossing_rate.to_string()]
        }),
    )?;

    let mut summary = Vec::new();
    let scopes = report.seeds.iter().map(|s| (s.seed.to_string(), s.rows.iter().collect::<Vec<_>>()));
    for (scope, rows) in scopes.chain(std::iter::once(("all".to_string(), report.rows().collect()))) {
        for (metric, vals) in [
            ("availability", rows.iter().map(|r| r.availability).collect::<Vec<_>>()),
            ("crossing_rate", rows.iter().map(|r| r.crossing_rate).collect()),
        ] {
            let [m, p5, p95] = mean_p5_p95(&vals);
            summary.push([report.setup.name().to_string(), scope.clone(), metric.to_string(), m.to_string(), p5.to_string(), p95.to_string()]);
        }
    }
    write_rows(&dir.join("summary.csv"), &["run", "seed", "metric", "mean", "p5", "p95"], summary)?;

    let mut signals = Vec::new();
    for s in &report.seeds {
        for phase in [Phase::Training, Phase::Evaluation] {
            for dir_ in [Direction::ToAgent, Direction::ToGnb] {
                let n: u64 = s.ledger.entries().filter(|(k, _)| k.0 == dir_ && k.2 == phase).map(|(_, v)| v).sum();
                let d = match dir_ {
                    Direction::ToAgent => "to_agent",
                    Direction::ToGnb => "to_gnb",
                };
                signals.push([report.setup.name().to_string(), s.seed.to_string(), phase.to_string(), d.to_string(), n.to_string()]);
            }
        }
    }
    write_rows(&dir.join("signals.csv"), &["run", "seed", "phase", "direction", "messages"], signals)?;

    let mut rewards = Vec::new();
    for s in &report.seeds {
        for (phase, series) in [(Phase::Training, &s.train_rewards), (Phase::Evaluation, &s.eval_rewards)] {
            for (i, r) in series.iter().enumerate() {
                rewards.push([s.seed.to_string(), phase.to_string(), i.to_string(), r.to_string()]);
            }
        }
    }
    write_rows(&dir.join("rewards.csv"), &["seed", "phase", "episode", "mean_reward"], rewards)?;

    write_rows(
        &dir.join("training.csv"),
        &["seed", "train_episodes", "converged_at"],
        report.seeds.iter().map(|s| {
            [s.seed.to_string(), s.train_episodes.to_string(), s.converged_at.map(|c| c.to_string()).unwrap_or_default()]
        }),
    )?;

    let any_ckpt = report.seeds.iter().any(|s| !s.checkpoints.is_empty());
    if any_ckpt {
        let cdir = dir.join("checkpoints");
        fs::create_dir_all(&cdir).map_err(|e| file_err(&cdir, e))?;
        for s in &report.seeds {
            for (name, text) in &s.checkpoints {
                let p = cdir.join(format!("seed{}_{name}.ckpt", s.seed));
                fs::write(&p, text).map_err(|e| file_err(&p, e))?;
            }
        }
    }
    Ok(())
}

fn mean_p5_p95(vals: &[f64]) -> [f64; 3] {
    if vals.is_empty() {
        return [f64::NAN; 3];
    }
    let mut s = vals.to_vec();
    s.sort_by(f64::total_cmp);
    [mean(s.iter().copied()), nearest_rank(&s, 5.0), nearest_rank(&s, 95.0)]
}

/// Empirical CDF `(x, P(X <= x))` at every distinct sample value, ascending.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in s.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

/// Empirical complementary CDF `(x, P(X > x))`.
pub fn empirical_ccdf(values: &[f64]) -> Vec<(f64, f64)> {
    empirical_cdf(values).into_iter().map(|(x, f)| (x, 1.0 - f)).collect()
}

/// Files written by [`emit_plot_data`].
pub const PLOT_FILES: [&str; 4] = ["availability_cdf.csv", "crossing_ccdf.csv", "errorbars.csv", "signal_bars.csv"];

fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| file_err(path, e))?;
    r.records().map(|x| x.map_err(|e| file_err(path, e))).collect()
}

fn field<T: FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T, ExperimentError> {
    rec.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| file_err(path, format!("bad field {i} in {rec:?}")))
}

/// Turn every run directory under `root` (one per setup, each holding
/// `metrics.csv` and `signals.csv`) into plot-ready CSVs under `root/plots`.
pub fn emit_plot_data(root: &Path) -> Result<PathBuf, ExperimentError> {
    let mut runs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| file_err(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n != "plots"))
        .collect();
    runs.sort();
    let missing: Vec<String> = runs
        .iter()
        .filter(|p| !p.join("metrics.csv").is_file() || !p.join("signals.csv").is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingRuns(missing));
    }
    if runs.is_empty() {
        return Err(ExperimentError::MissingRuns(vec![format!("{}/<setup>/metrics.csv", root.display())]));
    }

    let mut avail: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut cross: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut signals: BTreeMap<(String, String), u64> = BTreeMap::new();
    for dir in &runs {
        let p = dir.join("metrics.csv");
        for rec in read_csv(&p)? {
            let run = rec.get(0).unwrap_or_default().to_string();
            avail.entry(run.clone()).or_default().push(field(&p, &rec, 4)?);
            cross.entry(run).or_default().push(field(&p, &rec, 5)?);
        }
        let p = dir.join("signals.csv");
        for rec in read_csv(&p)? {
            let key = (rec.get(0).unwrap_or_default().to_string(), rec.get(2).unwrap_or_default().to_string());
            *signals.entry(key).or_default() += field::<u64>(&p, &rec, 4)?;
        }
    }

    let out = root.join("plots");
    fs::create_dir_all(&out).map_err(|e| file_err(&out, e))?;
    let mut cdf = Vec::new();
    for (run, v) in &avail {
        cdf.extend(empirical_cdf(v).into_iter().map(|(x, f)| [run.clone(), x.to_string(), f.to_string()]));
    }
    write_rows(&out.join(PLOT_FILES[0]), &["run", "availability", "cdf"], cdf)?;
    let mut ccdf = Vec::new();
    for (run, v) in &cross {
        ccdf.extend(empirical_ccdf(v).into_iter().map(|(x, f)| [run.clone(), x.to_string(), f.to_string()]));
    }
    write_rows(&out.join(PLOT_FILES[1]), &["run", "crossing_rate", "ccdf"], ccdf)?;
    let mut bars = Vec::new();
    for (metric, map) in [("availability", &avail), ("crossing_rate", &cross)] {
        for (run, v) in map {
            let [m, p5, p95] = mean_p5_p95(v);
            bars.push([run.clone(), metric.to_string(), m.to_string(), p5.to_string(), p95.to_string()]);
        }
    }
    write_rows(&out.join(PLOT_FILES[2]), &["run", "metric", "mean", "p5", "p95"], bars)?;
    write_rows(
        &out.join(PLOT_FILES[3]),
        &["run", "phase", "messages"],
        signals.iter().map(|((run, phase), n)| [run.clone(), phase.clone(), n.to_string()]),
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_names_round_trip() {
        for s in Setup::ALL {
            assert_eq!(s.name().to_lowercase().parse::<Setup>().unwrap(), s);
        }
        assert!("hrl".parse::<Setup>().is_err());
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(4, 1, 7), derive_seed(4, 1, 7));
        let mut all: Vec<u64> = (0..50).flat_map(|i| [train_episode_seed(0, i), eval_episode_seed(0, i), train_episode_seed(1, i)]).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 150);
    }

    #[test]
    fn cdf_by_hand() {
        let v = [0.99, 1.0, 0.95, 1.0, 0.99, 0.9, 1.0, 0.97, 0.99, 1.0];
        let cdf = empirical_cdf(&v);
        assert_eq!(cdf, vec![(0.9, 0.1), (0.95, 0.2), (0.97, 0.3), (0.99, 0.6), (1.0, 1.0)]);
        assert_eq!(empirical_cdf(&[1.0; 4]), vec![(1.0, 1.0)]);
        let ccdf = empirical_ccdf(&[0.0, 0.0, 2.0, 4.0]);
        assert_eq!(ccdf, vec![(0.0, 0.5), (2.0, 0.25), (4.0, 0.0)]);
    }
}
