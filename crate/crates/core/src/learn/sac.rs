//! Soft actor-critic over branching discrete heads.
//!
//! The critic outputs one value per (head, level); a joint action is scored by the
//! mean of its heads' values, and every head regresses toward the shared soft
//! Bellman target `r + gamma * mean_d V_d(s')` with
//! `V_d = sum_a pi_d(a) (Qtarget_d(a) - tau log pi_d(a))`. Each actor head is a
//! categorical `softmax(logits / tau)` trained to minimize
//! `sum_a pi_d(a) (tau log pi_d(a) - Q_d(a))`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint;
use super::{choose, softmax, Agent, AgentHyperparams, BranchingHead, Diagnostics, LearnError, Mlp, ReplayBuffer, StepKind, Transition};
use crate::scalar::NetScalar;

#[derive(Debug, Clone)]
pub struct SacAgent<F> {
    hp: AgentHyperparams,
    heads: BranchingHead,
    actor: Mlp<F>,
    critic: Mlp<F>,
    target: Mlp<F>,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    updates: u64,
}

impl<F: NetScalar> SacAgent<F> {
    pub fn new(state_len: usize, heads: BranchingHead, hp: AgentHyperparams, seed: u64) -> Result<Self, LearnError> {
        hp.validate()?;
        if state_len == 0 {
            return Err(LearnError::Shape("empty state".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![state_len];
        sizes.extend(&hp.hidden);
        sizes.push(heads.width());
        let actor = Mlp::new(&sizes, 0.01, &mut rng);
        let critic = Mlp::new(&sizes, 0.1, &mut rng);
        let target = critic.clone();
        let replay = ReplayBuffer::new(hp.replay_capacity);
        Ok(Self { hp, heads, actor, critic, target, replay, rng, updates: 0 })
    }

    pub(crate) fn from_parts(
        heads: BranchingHead,
        hp: AgentHyperparams,
        nets: [Mlp<F>; 3],
        seed: u64,
    ) -> Result<Self, LearnError> {
        let [actor, critic, target] = nets;
        for n in [&actor, &critic, &target] {
            if n.output_len() != heads.width() || n.input_len() != actor.input_len() {
                return Err(LearnError::Checkpoint("network shapes do not match the heads".into()));
            }
        }
        let replay = ReplayBuffer::new(hp.replay_capacity.max(1));
        Ok(Self { hp, heads, actor, critic, target, replay, rng: ChaCha8Rng::seed_from_u64(seed), updates: 0 })
    }

    pub fn hyperparams(&self) -> &AgentHyperparams {
        &self.hp
    }

    pub fn actor(&self) -> &Mlp<F> {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp<F> {
        &self.critic
    }

    pub fn target(&self) -> &Mlp<F> {
        &self.target
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Per-head critic values for one state.
    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, LearnError> {
        self.eval(&self.critic, state)
    }

    /// Per-head action probabilities for one state.
    pub fn policy(&self, state: &[f64]) -> Result<Vec<Vec<f64>>, LearnError> {
        let z = self.eval(&self.actor, state)?;
        Ok(self.heads.offsets().iter().zip(self.heads.all_levels()).map(|(&o, l)| softmax(&z[o..o + l.len()], self.hp.temperature)).collect())
    }

    fn eval(&self, net: &Mlp<F>, state: &[f64]) -> Result<Vec<f64>, LearnError> {
        let x: Vec<F> = state.iter().map(|&v| F::lit(v)).collect();
        Ok(net.forward_one(&x)?.into_iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
    }

    fn batch_matrix(&self, rows: &[&Transition], next: bool) -> Array2<F> {
        let width = self.actor.input_len();
        Array2::from_shape_fn((rows.len(), width), |(i, j)| {
            let s = if next { &rows[i].next_state } else { &rows[i].state };
            F::lit(s[j])
        })
    }

    fn update(&mut self, batch: &[&Transition]) -> Result<Diagnostics, LearnError> {
        let n = batch.len();
        let tau = self.hp.temperature;
        let gamma = self.hp.discount;
        let offsets = self.heads.offsets();
        let sizes: Vec<usize> = self.heads.all_levels().iter().map(Vec::len).collect();
        let dims = sizes.len() as f64;
        let s = self.batch_matrix(batch, false);
        let s2 = self.batch_matrix(batch, true);

        // soft Bellman target
        let next_logits = self.actor.forward(&s2)?;
        let next_q = self.target.forward(&s2)?;
        let mut y = vec![0.0; n];
        for (i, t) in batch.iter().enumerate() {
            let mut v = 0.0;
            if t.kind == StepKind::Continuing {
                for (&o, &k) in offsets.iter().zip(&sizes) {
                    let z: Vec<f64> = (o..o + k).map(|j| to64(next_logits[[i, j]])).collect();
                    let p = softmax(&z, tau);
                    v += (0..k).map(|a| p[a] * (to64(next_q[[i, o + a]]) - tau * p[a].max(1e-300).ln())).sum::<f64>();
                }
                v /= dims;
            }
            y[i] = t.reward + gamma * v;
        }

        // critic
        let (q, tape) = self.critic.forward_tape(&s)?;
        let mut dq = Array2::<F>::zeros(q.dim());
        let mut critic_loss = 0.0;
        let scale = 2.0 / (n as f64 * dims);
        for (i, t) in batch.iter().enumerate() {
            for (d, &o) in offsets.iter().enumerate() {
                let col = o + t.action[d];
                let err = to64(q[[i, col]]) - y[i];
                critic_loss += err * err;
                dq[[i, col]] = F::lit(scale * err);
            }
        }
        critic_loss /= n as f64 * dims;
        if !critic_loss.is_finite() {
            return Err(LearnError::NonFinite(format!("critic loss after {} updates", self.updates)));
        }
        let g = self.critic.backward(&tape, &dq)?;
        let lr = F::lit(self.hp.learning_rate);
        self.critic.sgd(&g, lr);

        // actor, against the pre-update critic values
        let (logits, tape) = self.actor.forward_tape(&s)?;
        let mut dz = Array2::<F>::zeros(logits.dim());
        let mut actor_loss = 0.0;
        let mut entropy = vec![0.0; sizes.len()];
        for i in 0..n {
            for (d, (&o, &k)) in offsets.iter().zip(&sizes).enumerate() {
                let z: Vec<f64> = (o..o + k).map(|j| to64(logits[[i, j]])).collect();
                let p = softmax(&z, tau);
                let logp: Vec<f64> = p.iter().map(|v| v.max(1e-300).ln()).collect();
                let f: Vec<f64> = (0..k).map(|a| tau * logp[a] - to64(q[[i, o + a]])).collect();
                let mean_f: f64 = (0..k).map(|a| p[a] * f[a]).sum();
                actor_loss += mean_f;
                entropy[d] -= (0..k).map(|a| p[a] * logp[a]).sum::<f64>();
                for a in 0..k {
                    dz[[i, o + a]] = F::lit(p[a] * (f[a] - mean_f) / (tau * n as f64));
                }
            }
        }
        actor_loss /= n as f64;
        if !actor_loss.is_finite() {
            return Err(LearnError::NonFinite(format!("actor loss after {} updates", self.updates)));
        }
        let g = self.actor.backward(&tape, &dz)?;
        self.actor.sgd(&g, lr);

        self.target.polyak(&self.critic, F::lit(self.hp.target_update_rate));
        self.updates += 1;
        for e in &mut entropy {
            *e /= n as f64;
        }
        Ok(Diagnostics { critic_loss, actor_loss, entropy })
    }

    pub fn to_checkpoint(&self) -> String {
        checkpoint::write_sac(self)
    }

    pub(crate) fn nets(&self) -> [&Mlp<F>; 3] {
        [&self.actor, &self.critic, &self.target]
    }

    pub(crate) fn heads_ref(&self) -> &BranchingHead {
        &self.heads
    }
}

fn to64<F: NetScalar>(v: F) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

impl<F: NetScalar> Agent for SacAgent<F> {
    fn heads(&self) -> &BranchingHead {
        &self.heads
    }

    fn act(&mut self, state: &[f64], explore: bool) -> Result<Vec<usize>, LearnError> {
        if state.len() != self.actor.input_len() {
            return Err(LearnError::Shape(format!("state length {} vs {}", state.len(), self.actor.input_len())));
        }
        let z = self.eval(&self.actor, state)?;
        choose(&self.heads, &z, self.hp.temperature, explore, &mut self.rng)
    }

    fn observe(&mut self, t: Transition) {
        self.replay.push(t);
    }

    fn train(&mut self) -> Result<Option<Diagnostics>, LearnError> {
        let mut last = None;
        for _ in 0..self.hp.updates_per_step {
            let Some(batch) = self.replay.sample(self.hp.batch_size, &mut self.rng) else {
                return Ok(last);
            };
            let batch: Vec<Transition> = batch.into_iter().cloned().collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            last = Some(self.update(&refs)?);
        }
        Ok(last)
    }

    fn checkpoint(&self) -> Option<String> {
        Some(self.to_checkpoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp() -> AgentHyperparams {
        AgentHyperparams {
            batch_size: 32,
            learning_rate: 1e-3,
            hidden: vec![32, 32],
            replay_capacity: 10_000,
            ..AgentHyperparams::default()
        }
    }

    fn step(s: Vec<f64>, a: usize, r: f64, kind: StepKind) -> Transition {
        Transition { state: s.clone(), action: vec![a], reward: r, next_state: s, kind }
    }

    #[test]
    fn gamma_zero_critic_learns_reward() {
        let hp = AgentHyperparams { discount: 0.0, ..hp() };
        let mut agent = SacAgent::<f64>::new(2, BranchingHead::uniform(1, &[0.0, 1.0]).unwrap(), hp, 1).unwrap();
        for _ in 0..64 {
            agent.observe(step(vec![0.5, -0.5], 1, 0.7, StepKind::Continuing));
        }
        for _ in 0..2000 {
            agent.train().unwrap();
        }
        let q = agent.q_values(&[0.5, -0.5]).unwrap();
        assert!((q[1] - 0.7).abs() < 1e-3, "{q:?}");
    }

    #[test]
    fn zero_rewards_keep_policy_uniform() {
        let mut agent = SacAgent::<f64>::new(3, BranchingHead::uniform(2, &[0.0, 1.0]).unwrap(), hp(), 2).unwrap();
        let states = [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        for k in 0..300 {
            let s = states[k % 3].clone();
            let s2 = states[(k + 1) % 3].clone();
            let a = agent.act(&s, true).unwrap();
            agent.observe(Transition { state: s, action: a, reward: 0.0, next_state: s2, kind: StepKind::Continuing });
            agent.train().unwrap();
        }
        for _ in 0..5000 {
            agent.train().unwrap();
        }
        let d = agent.train().unwrap().unwrap();
        for e in d.entropy {
            assert!(e > 0.95 * 2f64.ln(), "entropy {e}");
        }
        // the fixed point is the small entropy bonus gamma * tau * ln 2 / (1 - gamma)
        let fixed = 0.1 * 0.2 * 2f64.ln() / 0.9;
        for s in &states {
            for q in agent.q_values(s).unwrap() {
                assert!((q - fixed).abs() < 0.02, "{q}");
            }
        }
    }

    #[test]
    fn bandit_prefers_better_arm() {
        for seed in 0..3 {
            let mut agent = SacAgent::<f64>::new(1, BranchingHead::uniform(1, &[0.0, 1.0]).unwrap(), hp(), seed).unwrap();
            for _ in 0..5000 {
                let a = agent.act(&[1.0], true).unwrap();
                let r = if a[0] == 1 { 1.0 } else { 0.0 };
                agent.observe(step(vec![1.0], a[0], r, StepKind::Terminal));
                agent.train().unwrap();
            }
            assert_eq!(agent.act(&[1.0], false).unwrap(), vec![1]);
            assert!(agent.policy(&[1.0]).unwrap()[0][1] > 0.9);
        }
    }

    #[test]
    fn single_precision_trains() {
        let mut agent = SacAgent::<f32>::new(1, BranchingHead::uniform(1, &[0.0, 1.0]).unwrap(), hp(), 4).unwrap();
        for _ in 0..2000 {
            let a = agent.act(&[1.0], true).unwrap();
            agent.observe(step(vec![1.0], a[0], a[0] as f64, StepKind::Terminal));
            agent.train().unwrap();
        }
        assert_eq!(agent.act(&[1.0], false).unwrap(), vec![1]);
    }

    #[test]
    fn greedy_is_deterministic_and_shapes_fixed() {
        let heads = BranchingHead::uniform(3, &[1.0, 2.0]).unwrap();
        let mut agent = SacAgent::<f64>::new(4, heads.clone(), hp(), 5).unwrap();
        let s = [0.1, 0.2, 0.3, 0.4];
        let a = agent.act(&s, false).unwrap();
        for _ in 0..40 {
            let x = agent.act(&s, true).unwrap();
            agent.observe(Transition { state: s.to_vec(), action: x, reward: 0.5, next_state: s.to_vec(), kind: StepKind::Continuing });
            agent.train().unwrap();
        }
        assert_eq!(agent.heads(), &heads);
        assert_eq!(agent.actor().output_len(), 6);
        let b = agent.act(&s, false).unwrap();
        assert_eq!(b, agent.act(&s, false).unwrap());
        assert_eq!(a.len(), 3);
        assert!(agent.act(&[0.0], false).is_err());
    }
}
