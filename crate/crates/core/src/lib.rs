//! Discrete-event URLLC downlink simulator with a two-timescale hierarchical
//! reinforcement-learning harness for joint power / HARQ orchestration.

pub mod channel;
pub mod config;
pub mod experiment;
pub mod features;
pub mod kpi;
pub mod hierarchy;
pub mod learn;
pub mod netsim;
pub mod rewards;
pub mod scalar;

pub use config::ScenarioConfig;
pub use scalar::{NetScalar, Rational, TimeScalar};

/// Signal with floating-point breakpoints.
pub type Signal = kpi::BinarySignal<f64>;
/// Signal with exact rational breakpoints, as produced by the simulator.
pub type ExactSignal = kpi::BinarySignal<Rational>;
pub type Mlp64 = learn::Mlp<f64>;
pub type Mlp32 = learn::Mlp<f32>;
pub type Sac64 = learn::SacAgent<f64>;
pub type Sac32 = learn::SacAgent<f32>;
