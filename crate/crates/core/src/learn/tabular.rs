//! Soft-Q table over discretized states with the same branching decomposition
//! as the neural critic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax, choose, Agent, BranchingHead, Diagnostics, LearnError, StepKind, Transition};

/// Map a state vector onto a table row.
#[derive(Debug, Clone, PartialEq)]
pub enum StateBinning {
    /// Row = index of the largest entry (one-hot states).
    Argmax { n: usize },
    /// Every entry cut into `bins` equal cells over `[lo, hi]`; row-major over `dims` entries.
    Grid { dims: usize, bins: usize, lo: f64, hi: f64 },
}

impl StateBinning {
    pub fn n_rows(&self) -> usize {
        match *self {
            Self::Argmax { n } => n,
            Self::Grid { dims, bins, .. } => bins.pow(dims as u32),
        }
    }

    pub fn row(&self, state: &[f64]) -> Result<usize, LearnError> {
        match *self {
            Self::Argmax { n } => {
                if state.len() != n {
                    return Err(LearnError::Shape(format!("state length {} vs {n}", state.len())));
                }
                Ok(argmax(state))
            }
            Self::Grid { dims, bins, lo, hi } => {
                if state.len() != dims {
                    return Err(LearnError::Shape(format!("state length {} vs {dims}", state.len())));
                }
                let mut row = 0;
                for &x in state.iter().rev() {
                    let cell = (((x - lo) / (hi - lo)) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
                    row = row * bins + cell;
                }
                Ok(row)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabularSoftQ {
    heads: BranchingHead,
    binning: StateBinning,
    table: Vec<f64>,
    discount: f64,
    /// Zero gives hard-max backups and greedy exploration.
    temperature: f64,
    step_size: f64,
    rng: ChaCha8Rng,
}

impl TabularSoftQ {
    pub fn new(
        heads: BranchingHead,
        binning: StateBinning,
        discount: f64,
        temperature: f64,
        step_size: f64,
        seed: u64,
    ) -> Result<Self, LearnError> {
        if !(0.0..1.0).contains(&discount) || temperature < 0.0 || !(step_size > 0.0 && step_size <= 1.0) {
            return Err(LearnError::Hyperparams("need discount in [0,1), temperature >= 0, step size in (0,1]".into()));
        }
        let table = vec![0.0; binning.n_rows() * heads.width()];
        Ok(Self { heads, binning, table, discount, temperature, step_size, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn binning(&self) -> &StateBinning {
        &self.binning
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub(crate) fn from_parts(
        heads: BranchingHead,
        binning: StateBinning,
        params: [f64; 3],
        table: Vec<f64>,
    ) -> Result<Self, LearnError> {
        let mut t = Self::new(heads, binning, params[0], params[1], params[2], 0)?;
        if table.len() != t.table.len() {
            return Err(LearnError::Checkpoint(format!("table has {} entries, expected {}", table.len(), t.table.len())));
        }
        t.table = table;
        Ok(t)
    }

    pub(crate) fn params(&self) -> [f64; 3] {
        [self.discount, self.temperature, self.step_size]
    }

    /// Per-head values of a state.
    pub fn q_values(&self, state: &[f64]) -> Result<&[f64], LearnError> {
        let w = self.heads.width();
        let r = self.binning.row(state)?;
        Ok(&self.table[r * w..(r + 1) * w])
    }

    fn soft_value(&self, q: &[f64]) -> f64 {
        let mut v = 0.0;
        for (&o, l) in self.heads.offsets().iter().zip(self.heads.all_levels()) {
            let z = &q[o..o + l.len()];
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            v += if self.temperature == 0.0 {
                m
            } else {
                m + self.temperature * z.iter().map(|&x| ((x - m) / self.temperature).exp()).sum::<f64>().ln()
            };
        }
        v / self.heads.dims() as f64
    }

    /// One exact backup of a transition.
    pub fn update(&mut self, t: &Transition) -> Result<f64, LearnError> {
        let w = self.heads.width();
        let next = match t.kind {
            StepKind::Continuing => self.soft_value(self.q_values(&t.next_state)?),
            StepKind::Terminal => 0.0,
        };
        let y = t.reward + self.discount * next;
        let r = self.binning.row(&t.state)?;
        let mut sq = 0.0;
        for (d, &o) in self.heads.offsets().iter().enumerate() {
            let cell = &mut self.table[r * w + o + t.action[d]];
            let err = y - *cell;
            sq += err * err;
            *cell += self.step_size * err;
        }
        Ok(sq / self.heads.dims() as f64)
    }
}

impl Agent for TabularSoftQ {
    fn heads(&self) -> &BranchingHead {
        &self.heads
    }

    fn act(&mut self, state: &[f64], explore: bool) -> Result<Vec<usize>, LearnError> {
        let q = self.q_values(state)?.to_vec();
        let explore = explore && self.temperature > 0.0;
        choose(&self.heads, &q, self.temperature, explore, &mut self.rng)
    }

    fn observe(&mut self, t: Transition) {
        // shape errors surface through `act` on the same state
        let _ = self.update(&t);
    }

    fn train(&mut self) -> Result<Option<Diagnostics>, LearnError> {
        Ok(None)
    }

    fn checkpoint(&self) -> Option<String> {
        Some(super::checkpoint::write_tabular(self))
    }
}
