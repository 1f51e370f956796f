//! Agents over factored discrete actions: a soft actor-critic on small MLPs, a
//! tabular soft-Q learner, and fixed policies, all behind [`Agent`].

mod checkpoint;
mod mlp;
mod replay;
mod sac;
mod tabular;

use std::fmt;

use rand::Rng;
use thiserror::Error;

pub use checkpoint::{load_checkpoint, Checkpoint};
pub use mlp::{Gradients, Layer, Mlp, Tape};
pub use replay::ReplayBuffer;
pub use sac::SacAgent;
pub use tabular::{StateBinning, TabularSoftQ};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("value {0} is not a level of head {1}")]
    NotALevel(String, usize),
    #[error("remote agent: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentHyperparams {
    pub discount: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Entropy temperature; also the softmax temperature when exploring.
    pub temperature: f64,
    pub target_update_rate: f64,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    /// Gradient steps per observed transition once the buffer holds a batch.
    pub updates_per_step: usize,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            discount: 0.1,
            learning_rate: 0.0003,
            batch_size: 200,
            temperature: 0.2,
            target_update_rate: 0.005,
            replay_capacity: 100_000,
            hidden: vec![128, 128],
            updates_per_step: 1,
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::Hyperparams(m.into()));
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("batch_size must be >= 1 and <= replay_capacity");
        }
        if !(self.temperature > 0.0) {
            return bad("entropy_temperature must be > 0");
        }
        if !(self.target_update_rate > 0.0 && self.target_update_rate <= 1.0) {
            return bad("target_update_rate must lie in (0, 1]");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden layer widths must be positive");
        }
        Ok(())
    }
}

/// Level sets of each action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingHead {
    levels: Vec<Vec<f64>>,
}

impl BranchingHead {
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self, LearnError> {
        if levels.is_empty() || levels.iter().any(Vec::is_empty) {
            return Err(LearnError::Shape("every action dimension needs at least one level".into()));
        }
        Ok(Self { levels })
    }

    /// `dims` copies of the same level set.
    pub fn uniform(dims: usize, levels: &[f64]) -> Result<Self, LearnError> {
        Self::new(vec![levels.to_vec(); dims])
    }

    pub fn dims(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self, d: usize) -> &[f64] {
        &self.levels[d]
    }

    pub fn all_levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Output width of a network feeding these heads.
    pub fn width(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Start of each head's slice in the output vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.levels.len());
        let mut acc = 0;
        for l in &self.levels {
            o.push(acc);
            acc += l.len();
        }
        o
    }

    pub fn values(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().zip(&self.levels).map(|(&i, l)| l[i]).collect()
    }

    pub fn indices(&self, values: &[f64]) -> Result<Vec<usize>, LearnError> {
        if values.len() != self.levels.len() {
            return Err(LearnError::Shape(format!("{} values for {} heads", values.len(), self.levels.len())));
        }
        values
            .iter()
            .zip(&self.levels)
            .enumerate()
            .map(|(d, (v, l))| l.iter().position(|x| x == v).ok_or_else(|| LearnError::NotALevel(v.to_string(), d)))
            .collect()
    }

    /// Concatenation, e.g. power heads followed by retransmission heads.
    pub fn join(&self, other: &BranchingHead) -> BranchingHead {
        let mut levels = self.levels.clone();
        levels.extend(other.levels.iter().cloned());
        BranchingHead { levels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// The episode continues (or was cut by a time limit): bootstrap from the next state.
    Continuing,
    /// True terminal state: no bootstrap.
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<usize>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub kind: StepKind,
}

/// Losses and per-head policy entropies of one update.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub entropy: Vec<f64>,
}

/// Common contract of every decision maker.
pub trait Agent: Send {
    fn heads(&self) -> &BranchingHead;

    /// Level index per action dimension.
    fn act(&mut self, state: &[f64], explore: bool) -> Result<Vec<usize>, LearnError>;

    fn observe(&mut self, t: Transition);

    /// Run the configured number of updates; `None` while not enough data is stored.
    fn train(&mut self) -> Result<Option<Diagnostics>, LearnError>;

    fn learns(&self) -> bool {
        true
    }

    /// Called once after the final transition of an episode has been observed.
    fn end_episode(&mut self) -> Result<(), LearnError> {
        Ok(())
    }

    /// Decimal-text dump of everything needed to reproduce greedy actions.
    fn checkpoint(&self) -> Option<String> {
        None
    }
}

impl fmt::Debug for dyn Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Agent").field("heads", self.heads()).finish()
    }
}

/// Always emits the same level indices.
#[derive(Debug, Clone)]
pub struct FixedPolicy {
    heads: BranchingHead,
    action: Vec<usize>,
}

impl FixedPolicy {
    pub fn new(heads: BranchingHead, action: Vec<usize>) -> Result<Self, LearnError> {
        if action.len() != heads.dims() || action.iter().zip(heads.all_levels()).any(|(&i, l)| i >= l.len()) {
            return Err(LearnError::Shape("fixed action does not fit the heads".into()));
        }
        Ok(Self { heads, action })
    }

    /// Highest level on every dimension.
    pub fn max_levels(heads: BranchingHead) -> Self {
        let action = heads.all_levels().iter().map(|l| l.len() - 1).collect();
        Self { heads, action }
    }
}

impl Agent for FixedPolicy {
    fn heads(&self) -> &BranchingHead {
        &self.heads
    }

    fn act(&mut self, state: &[f64], _explore: bool) -> Result<Vec<usize>, LearnError> {
        if state.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite("state".into()));
        }
        Ok(self.action.clone())
    }

    fn observe(&mut self, _t: Transition) {}

    fn train(&mut self) -> Result<Option<Diagnostics>, LearnError> {
        Ok(None)
    }

    fn learns(&self) -> bool {
        false
    }
}

/// Softmax of `logits / temperature` (max-shifted).
pub(crate) fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| ((z - m) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Greedy index of a head; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sample_categorical<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Pick one level per head from a flat logit vector.
pub(crate) fn choose<R: Rng>(
    heads: &BranchingHead,
    logits: &[f64],
    temperature: f64,
    explore: bool,
    rng: &mut R,
) -> Result<Vec<usize>, LearnError> {
    if logits.iter().any(|v| v.is_nan()) {
        return Err(LearnError::NonFinite("logits".into()));
    }
    Ok(heads
        .offsets()
        .iter()
        .zip(heads.all_levels())
        .map(|(&o, l)| {
            let z = &logits[o..o + l.len()];
            if explore {
                sample_categorical(&softmax(z, temperature), rng)
            } else {
                argmax(z)
            }
        })
        .collect())
}
