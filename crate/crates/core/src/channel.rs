//! Path gains, SINR and the block-error model.
//!
//! The field holds linear power gains `g[b][u]` from every gNB to every device.
//! It is either static, ingested from CSV (possibly time-indexed), or evolved as
//! a log-domain Gauss-Markov process around its initial value.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("index out of range: gnb {gnb}, device {device}")]
    Index { gnb: usize, device: usize },
    #[error("degenerate SINR: zero signal over zero interference-plus-noise")]
    Degenerate,
    #[error("gain file dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-positive gain {value} at snapshot {snapshot}, gnb {gnb}, device {device}")]
    NonPositiveGain { snapshot: usize, gnb: usize, device: usize, value: f64 },
    #[error("malformed gain row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("evolve requires a gauss_markov field")]
    NotGaussMarkov,
    #[error("invalid radio config: {0}")]
    Radio(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Static,
    Ingested,
    GaussMarkov,
}

/// Parameters of the log-domain AR(1) evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMarkov {
    /// Stationary mean of `10 log10 g`, per entry (row-major `[b][u]`).
    pub mean_db: Vec<f64>,
    /// Stationary standard deviation in dB.
    pub sigma_db: f64,
    /// Correlation time constant in seconds.
    pub tau_s: f64,
}

impl GaussMarkov {
    pub fn coefficient(&self, dt: f64) -> f64 {
        if self.tau_s <= 0.0 {
            0.0
        } else {
            (-dt / self.tau_s).exp()
        }
    }
}

/// Linear path gains `[B × U]`, one matrix per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGainField {
    n_gnbs: usize,
    n_devices: usize,
    snapshots: Vec<Vec<f64>>,
    update_period_s: f64,
    mode: ChannelMode,
    dynamics: Option<GaussMarkov>,
}

impl PathGainField {
    pub fn new_static(n_gnbs: usize, n_devices: usize, gains: Vec<f64>) -> Result<Self, ChannelError> {
        Self::from_snapshots(n_gnbs, n_devices, vec![gains], 0.0, ChannelMode::Static)
    }

    pub fn from_snapshots(
        n_gnbs: usize,
        n_devices: usize,
        snapshots: Vec<Vec<f64>>,
        update_period_s: f64,
        mode: ChannelMode,
    ) -> Result<Self, ChannelError> {
        if snapshots.is_empty() {
            return Err(ChannelError::Dimension("no snapshots".into()));
        }
        for (s, snap) in snapshots.iter().enumerate() {
            if snap.len() != n_gnbs * n_devices {
                return Err(ChannelError::Dimension(format!(
                    "snapshot {s} has {} entries, expected {}",
                    snap.len(),
                    n_gnbs * n_devices
                )));
            }
            for (i, &g) in snap.iter().enumerate() {
                if !(g > 0.0) || !g.is_finite() {
                    return Err(ChannelError::NonPositiveGain {
                        snapshot: s,
                        gnb: i / n_devices,
                        device: i % n_devices,
                        value: g,
                    });
                }
            }
        }
        Ok(Self { n_gnbs, n_devices, snapshots, update_period_s, mode, dynamics: None })
    }

    /// Turn a static field into a Gauss-Markov one centred on its current gains.
    pub fn with_gauss_markov(mut self, sigma_db: f64, tau_s: f64) -> Self {
        let mean_db = self.snapshots[0].iter().map(|g| 10.0 * g.log10()).collect();
        self.snapshots.truncate(1);
        self.dynamics = Some(GaussMarkov { mean_db, sigma_db, tau_s });
        self.mode = ChannelMode::GaussMarkov;
        self
    }

    pub fn n_gnbs(&self) -> usize {
        self.n_gnbs
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    pub fn update_period_s(&self) -> f64 {
        self.update_period_s
    }

    pub fn n_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn dynamics(&self) -> Option<&GaussMarkov> {
        self.dynamics.as_ref()
    }

    pub fn snapshot(&self, idx: usize) -> &[f64] {
        &self.snapshots[idx.min(self.snapshots.len() - 1)]
    }

    /// Snapshot in force at time `t` (the last one persists past the end).
    pub fn snapshot_index_at(&self, t_s: f64) -> usize {
        if self.snapshots.len() == 1 || self.update_period_s <= 0.0 {
            return 0;
        }
        // small slack keeps exact multiples of the period on the later snapshot
        let idx = (t_s / self.update_period_s + 1e-9).floor().max(0.0) as usize;
        idx.min(self.snapshots.len() - 1)
    }

    pub fn gain(&self, snapshot: usize, gnb: usize, device: usize) -> f64 {
        self.snapshot(snapshot)[gnb * self.n_devices + device]
    }
}

/// Radio and block-error parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub noise_power_w: f64,
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub bler_midpoint_db: f64,
    /// Logistic slope in 1/dB.
    pub bler_slope: f64,
    /// SINR bonus per prior HARQ attempt, in dB.
    pub harq_combining_gain_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            noise_power_w: 1e-12,
            carrier_ghz: 2.6,
            bandwidth_mhz: 20.0,
            bler_midpoint_db: 5.0,
            bler_slope: 1.0,
            harq_combining_gain_db: 3.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.noise_power_w > 0.0) {
            return Err(ChannelError::Radio("noise_power_w must be > 0".into()));
        }
        if !(self.bler_slope > 0.0) {
            return Err(ChannelError::Radio("bler_slope must be > 0".into()));
        }
        if !(self.harq_combining_gain_db >= 0.0) {
            return Err(ChannelError::Radio("harq_combining_gain_db must be >= 0".into()));
        }
        Ok(())
    }
}

/// Downlink SINR in dB at `device` served by `serving_gnb`.
///
/// `tx_powers[b]` is the power gNB `b` radiates on the device's resources this
/// TTI; only gNBs with `active[b]` interfere.
pub fn sinr_db(
    serving_gnb: usize,
    device: usize,
    tx_powers: &[f64],
    active: &[bool],
    gains: &[f64],
    n_devices: usize,
    noise_power_w: f64,
) -> Result<f64, ChannelError> {
    let n_gnbs = tx_powers.len();
    if serving_gnb >= n_gnbs || device >= n_devices || gains.len() != n_gnbs * n_devices || active.len() != n_gnbs {
        return Err(ChannelError::Index { gnb: serving_gnb, device });
    }
    let signal = tx_powers[serving_gnb] * gains[serving_gnb * n_devices + device];
    let interference: f64 = (0..n_gnbs)
        .filter(|&b| b != serving_gnb && active[b])
        .map(|b| tx_powers[b] * gains[b * n_devices + device])
        .sum();
    let denom = interference + noise_power_w;
    if signal == 0.0 && denom == 0.0 {
        return Err(ChannelError::Degenerate);
    }
    Ok(10.0 * (signal / denom).log10())
}

/// Convenience wrapper over a [`PathGainField`] snapshot.
pub fn sinr(
    serving_gnb: usize,
    device: usize,
    tx_powers: &[f64],
    active: &[bool],
    field: &PathGainField,
    snapshot: usize,
    cfg: &RadioConfig,
) -> Result<f64, ChannelError> {
    if tx_powers.len() != field.n_gnbs {
        return Err(ChannelError::Index { gnb: serving_gnb, device });
    }
    sinr_db(serving_gnb, device, tx_powers, active, field.snapshot(snapshot), field.n_devices, cfg.noise_power_w)
}

/// Block error probability of HARQ attempt `attempt` (1-based).
pub fn bler(sinr_db: f64, attempt: u32, cfg: &RadioConfig) -> f64 {
    let attempt = attempt.max(1);
    let effective = sinr_db + f64::from(attempt - 1) * cfg.harq_combining_gain_db;
    1.0 / (1.0 + (cfg.bler_slope * (effective - cfg.bler_midpoint_db)).exp())
}

/// Advance a Gauss-Markov field by `dt` seconds. Pure in `(field, seed)`.
pub fn evolve(field: &PathGainField, seed: u64, dt: f64) -> Result<PathGainField, ChannelError> {
    let dyn_ = field.dynamics.as_ref().ok_or(ChannelError::NotGaussMarkov)?;
    let a = dyn_.coefficient(dt);
    let innovation = dyn_.sigma_db * (1.0 - a * a).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let next: Vec<f64> = field.snapshots[0]
        .iter()
        .zip(&dyn_.mean_db)
        .map(|(&g, &mu)| {
            let x = 10.0 * g.log10();
            let xi: f64 = StandardNormal.sample(&mut rng);
            let x = mu + a * (x - mu) + innovation * xi;
            10f64.powf(x / 10.0)
        })
        .collect();
    let mut out = field.clone();
    out.snapshots[0] = next;
    Ok(out)
}

/// Geometry and propagation parameters for the synthetic field.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    pub length_m: f64,
    pub width_m: f64,
    pub gnb_height_m: f64,
    pub device_height_m: f64,
    /// Path loss `intercept + 10 * exponent * log10(d) + 20 log10(fc_ghz)` in dB.
    pub pathloss_intercept_db: f64,
    pub pathloss_exponent: f64,
    pub shadowing_db: f64,
}

impl Default for FloorPlan {
    fn default() -> Self {
        Self {
            length_m: 40.0,
            width_m: 25.0,
            gnb_height_m: 8.0,
            device_height_m: 1.5,
            pathloss_intercept_db: 18.6,
            pathloss_exponent: 3.57,
            shadowing_db: 8.0,
        }
    }
}

/// Log-distance path loss with log-normal shadowing over a rectangular floor.
///
/// gNBs sit on the long axis at evenly spaced positions; the devices of gNB `b`
/// are dropped uniformly in its strip of the floor.
pub fn synthetic_field(
    plan: &FloorPlan,
    devices_per_gnb: &[usize],
    carrier_ghz: f64,
    seed: u64,
) -> Result<PathGainField, ChannelError> {
    let n_gnbs = devices_per_gnb.len();
    let n_devices: usize = devices_per_gnb.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strip = plan.length_m / n_gnbs as f64;
    let gnb_pos: Vec<(f64, f64)> = (0..n_gnbs).map(|b| (strip * (b as f64 + 0.5), plan.width_m / 2.0)).collect();
    let mut dev_pos = Vec::with_capacity(n_devices);
    for (b, &n) in devices_per_gnb.iter().enumerate() {
        for _ in 0..n {
            let x = strip * b as f64 + rng.random::<f64>() * strip;
            let y = rng.random::<f64>() * plan.width_m;
            dev_pos.push((x, y));
        }
    }
    let dh = plan.gnb_height_m - plan.device_height_m;
    let fc_term = 20.0 * carrier_ghz.log10();
    let mut gains = vec![0.0; n_gnbs * n_devices];
    for (b, &(gx, gy)) in gnb_pos.iter().enumerate() {
        for (u, &(x, y)) in dev_pos.iter().enumerate() {
            let d = ((gx - x).powi(2) + (gy - y).powi(2) + dh * dh).sqrt().max(1.0);
            let shadow: f64 = StandardNormal.sample(&mut rng);
            let pl = plan.pathloss_intercept_db
                + 10.0 * plan.pathloss_exponent * d.log10()
                + fc_term
                + plan.shadowing_db * shadow;
            gains[b * n_devices + u] = 10f64.powf(-pl / 10.0);
        }
    }
    PathGainField::new_static(n_gnbs, n_devices, gains)
}

/// Read a `snapshot,gnb,device,gain_linear` CSV.
pub fn ingest_gains<R: Read>(input: R, update_period_s: f64) -> Result<PathGainField, ChannelError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| ChannelError::Io(e.to_string()))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["snapshot", "gnb", "device", "gain_linear"] {
        return Err(ChannelError::MalformedRow { row: 0, reason: format!("unexpected header {headers:?}") });
    }
    let mut entries = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| ChannelError::MalformedRow { row, reason: e.to_string() })?;
        if rec.len() != 4 {
            return Err(ChannelError::MalformedRow { row, reason: format!("{} fields", rec.len()) });
        }
        let idx = |k: usize| {
            rec[k].trim().parse::<usize>().map_err(|e| ChannelError::MalformedRow { row, reason: e.to_string() })
        };
        let (s, b, u) = (idx(0)?, idx(1)?, idx(2)?);
        let g: f64 = rec[3].trim().parse().map_err(|e: std::num::ParseFloatError| ChannelError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if !(g > 0.0) || !g.is_finite() {
            return Err(ChannelError::NonPositiveGain { snapshot: s, gnb: b, device: u, value: g });
        }
        entries.push((s, b, u, g));
    }
    let n_snap = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let n_gnbs = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    let n_devices = entries.iter().map(|e| e.2 + 1).max().unwrap_or(0);
    if n_snap == 0 {
        return Err(ChannelError::Dimension("empty gain file".into()));
    }
    let mut snaps = vec![vec![f64::NAN; n_gnbs * n_devices]; n_snap];
    for &(s, b, u, g) in &entries {
        let slot = &mut snaps[s][b * n_devices + u];
        if !slot.is_nan() {
            return Err(ChannelError::Dimension(format!("duplicate entry snapshot {s}, gnb {b}, device {u}")));
        }
        *slot = g;
    }
    if entries.len() != n_snap * n_gnbs * n_devices {
        return Err(ChannelError::Dimension(format!(
            "{} entries for {n_snap} x {n_gnbs} x {n_devices}",
            entries.len()
        )));
    }
    let mode = if n_snap == 1 { ChannelMode::Static } else { ChannelMode::Ingested };
    PathGainField::from_snapshots(n_gnbs, n_devices, snaps, update_period_s, mode)
}

pub fn export_gains<W: Write>(field: &PathGainField, out: W) -> Result<(), ChannelError> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| ChannelError::Io(e.to_string());
    wtr.write_record(["snapshot", "gnb", "device", "gain_linear"]).map_err(io)?;
    for (s, snap) in field.snapshots.iter().enumerate() {
        for b in 0..field.n_gnbs {
            for u in 0..field.n_devices {
                let g = snap[b * field.n_devices + u];
                wtr.write_record([s.to_string(), b.to_string(), u.to_string(), format!("{g:e}")]).map_err(io)?;
            }
        }
    }
    wtr.flush().map_err(|e| ChannelError::Io(e.to_string()))
}
