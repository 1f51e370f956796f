//! Newline-delimited JSON link between the simulator and out-of-process agents.
//!
//! The simulator side listens; each agent process connects, says `hello`, and
//! then answers every `state` with exactly one `action` for the same step.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{Agent, BranchingHead, Diagnostics, LearnError, StepKind, Transition};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame: {0}")]
    Frame(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

impl From<GatewayError> for LearnError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Learn(l) => l,
            other => LearnError::Remote(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Message {
    Hello { role: String, agent_id: String },
    State {
        agent_id: String,
        step: u64,
        features: Vec<f64>,
        reward: Option<f64>,
        /// Training-phase report: sample the action and learn from the reward.
        #[serde(default, skip_serializing_if = "is_false")]
        explore: bool,
        /// Closing report of an episode; answered with an empty action.
        #[serde(default, skip_serializing_if = "is_false")]
        last: bool,
    },
    Action { agent_id: String, step: u64, values: Vec<f64> },
    Reset { seed: u64 },
    Bye {},
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Strict one-action-per-state ordering for a single agent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lockstep {
    next_state: u64,
    awaiting: Option<u64>,
}

impl Lockstep {
    pub fn on_state(&mut self, step: u64) -> Result<(), GatewayError> {
        if let Some(s) = self.awaiting {
            return Err(GatewayError::Protocol(format!("state {step} while action {s} is outstanding")));
        }
        if step != self.next_state {
            return Err(GatewayError::Protocol(format!("state for step {step}, expected {}", self.next_state)));
        }
        self.awaiting = Some(step);
        self.next_state += 1;
        Ok(())
    }

    pub fn on_action(&mut self, step: u64) -> Result<(), GatewayError> {
        match self.awaiting {
            Some(s) if s == step => {
                self.awaiting = None;
                Ok(())
            }
            Some(s) => Err(GatewayError::Protocol(format!("action for step {step}, expected {s}"))),
            None => Err(GatewayError::Protocol(format!("action for step {step} without a state"))),
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

struct Wire {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    frames: Arc<AtomicU64>,
}

impl Wire {
    fn new(stream: TcpStream) -> Result<Self, GatewayError> {
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self { reader, writer: BufWriter::new(stream), frames: Arc::default() })
    }

    fn send(&mut self, m: &Message) -> Result<(), GatewayError> {
        let line = serde_json::to_string(m).map_err(|e| GatewayError::Frame(e.to_string()))?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.frames.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, GatewayError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(GatewayError::Protocol("peer closed the connection".into()));
        }
        self.frames.fetch_add(1, Ordering::Relaxed);
        serde_json::from_str(line.trim_end()).map_err(|e| GatewayError::Frame(format!("{e}: {}", line.trim_end())))
    }
}

/// Simulator-side endpoint.
#[derive(Debug)]
pub struct Gateway {
    listener: TcpListener,
}

impl Gateway {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self, GatewayError> {
        Ok(Self { listener: TcpListener::bind(addr)? })
    }

    pub fn local_addr(&self) -> Result<std::net::SocketAddr, GatewayError> {
        Ok(self.listener.local_addr()?)
    }

    /// Wait for one agent and wrap it as an [`Agent`] acting on `heads`.
    pub fn accept(&self, heads: BranchingHead) -> Result<RemoteAgent, GatewayError> {
        let (stream, _) = self.listener.accept()?;
        let mut wire = Wire::new(stream)?;
        match wire.recv()? {
            Message::Hello { role, agent_id } if role == "agent" => {
                Ok(RemoteAgent { wire, heads, agent_id, lock: Lockstep::default(), step: 0, reward: None, last_next_state: Vec::new(), explore: false, episodes: 0 })
            }
            other => {
                let _ = wire.send(&Message::Bye {});
                Err(GatewayError::Protocol(format!("expected hello from an agent, got {other:?}")))
            }
        }
    }
}

/// Proxy for an agent living in another process.
///
/// Learning happens on the far side, so [`Agent::learns`] is false here.
pub struct RemoteAgent {
    wire: Wire,
    heads: BranchingHead,
    agent_id: String,
    lock: Lockstep,
    step: u64,
    reward: Option<f64>,
    last_next_state: Vec<f64>,
    explore: bool,
    episodes: u64,
}

impl std::fmt::Debug for RemoteAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteAgent").field("agent_id", &self.agent_id).field("step", &self.step).finish()
    }
}

impl RemoteAgent {
    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    /// Frames sent and received so far, including hello/reset/bye.
    pub fn wire_frames(&self) -> u64 {
        self.wire.frames.load(Ordering::Relaxed)
    }

    /// Live view of [`Self::wire_frames`] that outlives boxing the agent.
    pub fn frame_counter(&self) -> Arc<AtomicU64> {
        self.wire.frames.clone()
    }

    fn exchange(&mut self, state: &[f64], last: bool) -> Result<Vec<f64>, GatewayError> {
        let step = self.step;
        self.lock.on_state(step)?;
        self.wire.send(&Message::State {
            agent_id: self.agent_id.clone(),
            step,
            features: state.to_vec(),
            reward: self.reward.take(),
            explore: self.explore,
            last,
        })?;
        self.step += 1;
        match self.wire.recv()? {
            Message::Action { agent_id, step: s, values } if agent_id == self.agent_id => {
                self.lock.on_action(s)?;
                Ok(values)
            }
            other => Err(GatewayError::Protocol(format!("expected action for step {step}, got {other:?}"))),
        }
    }
}

impl Agent for RemoteAgent {
    fn heads(&self) -> &BranchingHead {
        &self.heads
    }

    fn act(&mut self, state: &[f64], explore: bool) -> Result<Vec<usize>, LearnError> {
        self.explore = explore;
        let values = self.exchange(state, false)?;
        self.heads.indices(&values)
    }

    fn observe(&mut self, t: Transition) {
        self.reward = Some(t.reward);
        self.last_next_state = t.next_state;
    }

    fn train(&mut self) -> Result<Option<Diagnostics>, LearnError> {
        Ok(None)
    }

    fn learns(&self) -> bool {
        false
    }

    fn end_episode(&mut self) -> Result<(), LearnError> {
        // the closing report carries the last reward; its action is never applied
        if self.reward.is_some() {
            let s = std::mem::take(&mut self.last_next_state);
            self.exchange(&s, true)?;
        }
        self.episodes += 1;
        self.wire.send(&Message::Reset { seed: self.episodes }).map_err(LearnError::from)?;
        self.lock.reset();
        self.step = 0;
        Ok(())
    }
}

impl Drop for RemoteAgent {
    fn drop(&mut self) {
        let _ = self.wire.send(&Message::Bye {});
    }
}

/// Upper bounds on what the far-side agent does with training-phase reports;
/// evaluation-phase reports are always answered greedily without learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServeMode {
    pub explore: bool,
    pub learn: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionStats {
    pub actions: u64,
    pub episodes: u64,
    pub frames: u64,
}

/// Agent-side loop: connect, announce `agent_id`, answer states until `bye`.
pub fn serve_agent(
    addr: impl ToSocketAddrs,
    agent_id: &str,
    agent: &mut dyn Agent,
    mode: ServeMode,
) -> Result<SessionStats, GatewayError> {
    let mut wire = Wire::new(TcpStream::connect(addr)?)?;
    wire.send(&Message::Hello { role: "agent".into(), agent_id: agent_id.into() })?;
    let mut lock = Lockstep::default();
    let mut stats = SessionStats::default();
    let mut pending: Option<(Vec<f64>, Vec<usize>)> = None;
    loop {
        match wire.recv()? {
            Message::State { agent_id: id, step, features, reward, explore, last } => {
                if id != agent_id {
                    let _ = wire.send(&Message::Bye {});
                    return Err(GatewayError::Protocol(format!("state addressed to {id:?}")));
                }
                if let Err(e) = lock.on_state(step) {
                    let _ = wire.send(&Message::Bye {});
                    return Err(e);
                }
                if let (Some(r), Some((s, a))) = (reward, pending.take()) {
                    let t = Transition { state: s, action: a, reward: r, next_state: features.clone(), kind: StepKind::Continuing };
                    agent.observe(t);
                    if mode.learn && explore && agent.learns() {
                        agent.train()?;
                    }
                }
                let values = if last {
                    Vec::new()
                } else {
                    let a = agent.act(&features, mode.explore && explore)?;
                    let v = agent.heads().values(&a);
                    pending = Some((features, a));
                    v
                };
                lock.on_action(step)?;
                wire.send(&Message::Action { agent_id: agent_id.into(), step, values })?;
                stats.actions += 1;
            }
            Message::Reset { .. } => {
                agent.end_episode()?;
                pending = None;
                lock.reset();
                stats.episodes += 1;
            }
            Message::Bye {} => break,
            other => {
                let _ = wire.send(&Message::Bye {});
                return Err(GatewayError::Protocol(format!("unexpected {other:?}")));
            }
        }
    }
    stats.frames = wire.frames.load(Ordering::Relaxed);
    Ok(stats)
}
