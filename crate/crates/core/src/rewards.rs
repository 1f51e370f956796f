//! Low- and high-level rewards from windowed KPI estimates.
//!
//! Crossing rates enter in 1/s exactly as estimated; the trade-off against
//! availability is set only through `omega`.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use thiserror::Error;

use crate::kpi::KpiEstimate;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("reward over an empty device set")]
    NoDevices,
    #[error("omega must lie in (0, 1) and eta must be > 0")]
    BadConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    Average,
    RiskSensitive,
}

impl FromStr for RewardMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "average" => Ok(Self::Average),
            "risk_sensitive" => Ok(Self::RiskSensitive),
            _ => Err(format!("expected average|risk_sensitive, got {s:?}")),
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Average => "average",
            Self::RiskSensitive => "risk_sensitive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub omega: f64,
    pub eta: f64,
    pub mode: RewardMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { omega: 0.5, eta: 2.0, mode: RewardMode::RiskSensitive }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if self.omega > 0.0 && self.omega < 1.0 && self.eta > 0.0 {
            Ok(())
        } else {
            Err(RewardError::BadConfig)
        }
    }

    fn weights<F: Float>(&self) -> (F, F) {
        (F::from(self.omega).expect("omega"), F::from(self.eta).expect("eta"))
    }
}

/// Mean over devices of `omega * availability - (1 - omega) * crossing_rate`, scaled by `1 / omega`.
pub fn reward_avg<F: Float>(kpis: &[KpiEstimate<F>], cfg: &RewardConfig) -> Result<F, RewardError> {
    if kpis.is_empty() {
        return Err(RewardError::NoDevices);
    }
    let (omega, _) = cfg.weights::<F>();
    let one = F::one();
    let sum = kpis.iter().fold(F::zero(), |acc, k| acc + omega * k.availability - (one - omega) * k.crossing_rate);
    Ok(sum / (omega * F::from(kpis.len()).expect("count")))
}

/// `exp(eta / omega * (r' - omega))` with `r'` built from the worst availability and crossing rate.
pub fn reward_risk<F: Float>(kpis: &[KpiEstimate<F>], cfg: &RewardConfig) -> Result<F, RewardError> {
    if kpis.is_empty() {
        return Err(RewardError::NoDevices);
    }
    let (omega, eta) = cfg.weights::<F>();
    let min_a = kpis.iter().map(|k| k.availability).fold(F::infinity(), F::min);
    let max_psi = kpis.iter().map(|k| k.crossing_rate).fold(F::neg_infinity(), F::max);
    let r_prime = omega * min_a - (F::one() - omega) * max_psi;
    Ok((eta / omega * (r_prime - omega)).exp())
}

/// Low-level reward in the configured mode.
pub fn reward<F: Float>(kpis: &[KpiEstimate<F>], cfg: &RewardConfig) -> Result<F, RewardError> {
    match cfg.mode {
        RewardMode::Average => reward_avg(kpis, cfg),
        RewardMode::RiskSensitive => reward_risk(kpis, cfg),
    }
}

/// Global reward over all gNBs: mean of per-gNB averages, or the risk form
/// with min / max taken over every device.
pub fn reward_high<F: Float, K: AsRef<[KpiEstimate<F>]>>(per_gnb: &[K], cfg: &RewardConfig) -> Result<F, RewardError> {
    if per_gnb.is_empty() {
        return Err(RewardError::NoDevices);
    }
    match cfg.mode {
        RewardMode::Average => {
            let mut sum = F::zero();
            for kpis in per_gnb {
                sum = sum + reward_avg(kpis.as_ref(), cfg)?;
            }
            Ok(sum / F::from(per_gnb.len()).expect("count"))
        }
        RewardMode::RiskSensitive => {
            let all: Vec<KpiEstimate<F>> = per_gnb.iter().flat_map(|k| k.as_ref().iter().copied()).collect();
            reward_risk(&all, cfg)
        }
    }
}
