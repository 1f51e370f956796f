//! Discrete-event downlink simulator at TTI granularity.
//!
//! Each device receives periodic packets that queue in its RLC buffer. Every TTI
//! each gNB schedules the head-of-line packet of its backlogged devices (one
//! RB-group each), draws decoding success from the block-error model, and
//! retransmits failures up to the packet's maximum number of transmissions.
//! Packets that cannot be delivered within the delay bound are discarded.
//!
//! Frequency plan: device `j` of every gNB uses RB-group `j`, so the interference
//! a device sees comes from the co-channel devices of the other gNBs that are
//! scheduled in the same TTI, at their own transmit powers.
//!
//! `Y(t)` drops to 0 when a packet is lost and returns to 1 at the next timely
//! delivery; `Z(t)` is maintained incrementally alongside it. All event times are
//! integer ticks and traces are exact rationals.

use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{self, ChannelError, PathGainField};
use crate::config::{GainSource, ScenarioConfig};
use crate::kpi::{KpiEstimate, KpiWindow, SignalBuilder, WindowTally};
use crate::scalar::{rational_from_f64, Rational, TimeScalar};
use crate::ExactSignal;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("action vector has length {got}, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("value {0} is not a configured level")]
    NotALevel(String),
    #[error("gnb index {0} out of range")]
    NoSuchGnb(usize),
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
    #[error("configuration: {0}")]
    Config(String),
}

/// Integer time base shared by every duration in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeBase {
    pub ticks_per_second: i64,
    pub tti: i64,
    pub period: i64,
    pub offset: i64,
    pub stagger: i64,
    pub delay_bound: i64,
    pub survival: i64,
    pub gain_update: i64,
}

fn lcm(a: i64, b: i64) -> i64 {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

impl TimeBase {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let conv = |name: &str, v: f64| {
            rational_from_f64(v).ok_or_else(|| SimError::Config(format!("{name} is not a finite duration")))
        };
        let durations = [
            conv("tti_s", cfg.tti_s)?,
            conv("traffic_period_s", cfg.traffic_period_s)?,
            conv("traffic_offset_s", cfg.traffic_offset_s)?,
            conv("delay_bound_s", cfg.delay_bound_s)?,
            conv("survival_time_s", cfg.survival_time_s)?,
            conv("gain_update_period_s", cfg.channel.gain_update_period_s)?,
            conv("gnb_stagger_s", cfg.gnb_stagger_s)?,
        ];
        let tps = durations.iter().fold(1i64, |acc, r| lcm(acc, *r.denom()));
        let ticks = |r: &Rational| (r * Rational::from_integer(tps)).to_integer();
        Ok(Self {
            ticks_per_second: tps,
            tti: ticks(&durations[0]),
            period: ticks(&durations[1]),
            offset: ticks(&durations[2]),
            delay_bound: ticks(&durations[3]),
            survival: ticks(&durations[4]),
            gain_update: ticks(&durations[5]),
            stagger: ticks(&durations[6]),
        })
    }

    pub fn seconds(&self, ticks: i64) -> Rational {
        Rational::new(ticks, self.ticks_per_second)
    }
}

#[derive(Debug, Clone)]
struct Packet {
    id: u64,
    arrival: i64,
    attempts: u32,
    /// Fixed at the first transmission; later action changes do not apply.
    max_tx: Option<u32>,
    first_tx: Option<i64>,
    eligible_tti: u64,
}

/// Per-window raw counters and samples of one device.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviceWindow {
    pub device: usize,
    pub arrived: usize,
    pub delivered: usize,
    pub lost: usize,
    pub tx_attempts: usize,
    /// Transmissions spent on packets finished (delivered or lost) in the window.
    pub finished_tx: usize,
    pub delay_sum_s: f64,
    pub rb_used: usize,
    pub ttis: usize,
    pub sinr_db: Vec<f64>,
    pub path_gain_db: Vec<f64>,
    pub rlc_buffer: Vec<f64>,
    pub tally: Option<WindowTally<Rational>>,
    /// `Y` breakpoints inside the window.
    pub y_segment: Vec<(Rational, bool)>,
}

impl DeviceWindow {
    pub fn packet_loss_rate(&self) -> f64 {
        let finished = self.delivered + self.lost;
        if finished == 0 {
            0.0
        } else {
            self.lost as f64 / finished as f64
        }
    }

    pub fn mean_delay_s(&self) -> f64 {
        if self.delivered == 0 {
            0.0
        } else {
            self.delay_sum_s / self.delivered as f64
        }
    }

    pub fn mean_harq_tx(&self) -> f64 {
        let finished = self.delivered + self.lost;
        if finished == 0 {
            0.0
        } else {
            self.finished_tx as f64 / finished as f64
        }
    }

    pub fn mean_rb_used(&self) -> f64 {
        if self.ttis == 0 {
            0.0
        } else {
            self.rb_used as f64 / self.ttis as f64
        }
    }

    pub fn kpi(&self) -> KpiEstimate<f64> {
        match &self.tally {
            Some(t) => t.estimate().to_f64(),
            None => KpiEstimate {
                availability: 1.0,
                crossing_rate: 0.0,
                downtime_mean: 0.0,
                window: KpiWindow { start: 0.0, end: 0.0 },
            },
        }
    }

    pub fn mean_downtime_s(&self) -> f64 {
        self.kpi().downtime_mean
    }

    /// Union of consecutive windows of the same device.
    pub fn merge(parts: &[DeviceWindow]) -> Option<DeviceWindow> {
        let first = parts.first()?;
        let mut out = DeviceWindow { device: first.device, ..Default::default() };
        let mut tallies = Vec::with_capacity(parts.len());
        for p in parts {
            if p.device != first.device {
                return None;
            }
            out.arrived += p.arrived;
            out.delivered += p.delivered;
            out.lost += p.lost;
            out.tx_attempts += p.tx_attempts;
            out.finished_tx += p.finished_tx;
            out.delay_sum_s += p.delay_sum_s;
            out.rb_used += p.rb_used;
            out.ttis += p.ttis;
            out.sinr_db.extend_from_slice(&p.sinr_db);
            out.path_gain_db.extend_from_slice(&p.path_gain_db);
            out.rlc_buffer.extend_from_slice(&p.rlc_buffer);
            out.y_segment.extend_from_slice(&p.y_segment);
            if let Some(t) = p.tally {
                tallies.push(t);
            }
        }
        out.tally = if tallies.len() == parts.len() { Some(WindowTally::merge(&tallies)?) } else { None };
        Some(out)
    }
}

/// Measurements of all devices of one gNB over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeasurements {
    pub gnb: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub devices: Vec<DeviceWindow>,
}

impl WindowMeasurements {
    pub fn kpis(&self) -> Vec<KpiEstimate<f64>> {
        self.devices.iter().map(DeviceWindow::kpi).collect()
    }

    /// Union of consecutive windows of the same gNB.
    pub fn merge(parts: &[WindowMeasurements]) -> Option<WindowMeasurements> {
        let first = parts.first()?;
        if parts.iter().any(|p| p.gnb != first.gnb || p.devices.len() != first.devices.len()) {
            return None;
        }
        let devices = (0..first.devices.len())
            .map(|i| DeviceWindow::merge(&parts.iter().map(|p| p.devices[i].clone()).collect::<Vec<_>>()))
            .collect::<Option<Vec<_>>>()?;
        Some(WindowMeasurements { gnb: first.gnb, start_s: first.start_s, end_s: parts.last()?.end_s, devices })
    }
}

/// Public view of a device's radio state.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRadioState {
    pub queued: usize,
    /// `(packet id, attempts used, first transmission time)` of the in-flight packet.
    pub inflight: Option<(u64, u32, Rational)>,
    pub current_power_w: f64,
    pub current_max_tx: u32,
    pub arrived: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Attempt context handed to a link override.
#[derive(Debug, Clone, Copy)]
pub struct AttemptInfo {
    pub device: usize,
    pub packet_id: u64,
    pub attempt: u32,
    pub tti: u64,
    pub sinr_db: f64,
}

/// Test hook: return `Some(p)` to force the block-error probability of an attempt.
pub type LinkOverride = Box<dyn FnMut(&AttemptInfo) -> Option<f64> + Send>;

#[derive(Debug, Clone)]
struct Device {
    gnb: usize,
    rb: usize,
    queue: VecDeque<Packet>,
    power_w: f64,
    max_tx: u32,
    next_arrival: i64,
    next_id: u64,
    y: SignalBuilder<Rational>,
    z: SignalBuilder<Rational>,
    y_down_since: Option<i64>,
    win: DeviceWindow,
    arrived: u64,
    delivered: u64,
    dropped: u64,
}

pub struct Simulator {
    cfg: ScenarioConfig,
    tb: TimeBase,
    field: PathGainField,
    rng: ChaCha8Rng,
    devices: Vec<Device>,
    tti: u64,
    window_start: i64,
    rr: Vec<usize>,
    link_override: Option<LinkOverride>,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator").field("tti", &self.tti).field("devices", &self.devices.len()).finish()
    }
}

/// Build the path-gain field a scenario asks for.
pub fn build_field(cfg: &ScenarioConfig) -> Result<PathGainField, SimError> {
    let ch = &cfg.channel;
    let field = match ch.source {
        GainSource::Static => {
            channel::synthetic_field(&ch.plan, &cfg.devices_per_gnb, cfg.radio.carrier_ghz, ch.channel_seed)?
        }
        GainSource::GaussMarkov => {
            channel::synthetic_field(&ch.plan, &cfg.devices_per_gnb, cfg.radio.carrier_ghz, ch.channel_seed)?
                .with_gauss_markov(ch.gm_sigma_db, ch.gm_tau_s)
        }
        GainSource::Ingested => {
            let path = ch.gain_file.as_ref().ok_or_else(|| SimError::Config("gain_file missing".into()))?;
            let file = std::fs::File::open(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
            channel::ingest_gains(file, ch.gain_update_period_s)?
        }
    };
    Ok(field)
}

impl Simulator {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let field = build_field(cfg)?;
        Self::with_field(cfg, field)
    }

    pub fn with_field(cfg: &ScenarioConfig, field: PathGainField) -> Result<Self, SimError> {
        cfg.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if field.n_gnbs() != cfg.n_gnbs || field.n_devices() != cfg.n_devices() {
            return Err(SimError::Channel(ChannelError::Dimension(format!(
                "field is {}x{}, topology is {}x{}",
                field.n_gnbs(),
                field.n_devices(),
                cfg.n_gnbs,
                cfg.n_devices()
            ))));
        }
        let tb = TimeBase::new(cfg)?;
        let power = *cfg.power_levels_w.last().expect("validated");
        let max_tx = *cfg.retx_levels.last().expect("validated");
        let mut devices = Vec::with_capacity(cfg.n_devices());
        for (b, &n) in cfg.devices_per_gnb.iter().enumerate() {
            for j in 0..n {
                devices.push(Device {
                    gnb: b,
                    rb: j,
                    queue: VecDeque::new(),
                    power_w: power,
                    max_tx,
                    next_arrival: tb.offset + b as i64 * tb.stagger,
                    next_id: 0,
                    y: SignalBuilder::new(true),
                    z: SignalBuilder::new(true),
                    y_down_since: None,
                    win: DeviceWindow { device: devices.len(), ..Default::default() },
                    arrived: 0,
                    delivered: 0,
                    dropped: 0,
                });
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            tb,
            field,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            devices,
            tti: 0,
            window_start: 0,
            rr: vec![0; cfg.n_gnbs],
            link_override: None,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn time_base(&self) -> TimeBase {
        self.tb
    }

    pub fn field(&self) -> &PathGainField {
        &self.field
    }

    pub fn now_ticks(&self) -> i64 {
        self.tti as i64 * self.tb.tti
    }

    pub fn now(&self) -> Rational {
        self.tb.seconds(self.now_ticks())
    }

    pub fn tti_index(&self) -> u64 {
        self.tti
    }

    pub fn set_link_override(&mut self, f: Option<LinkOverride>) {
        self.link_override = f;
    }

    pub fn device_gnb(&self, device: usize) -> usize {
        self.devices[device].gnb
    }

    pub fn device_state(&self, device: usize) -> DeviceRadioState {
        let d = &self.devices[device];
        let inflight = d
            .queue
            .front()
            .filter(|p| p.attempts > 0)
            .map(|p| (p.id, p.attempts, self.tb.seconds(p.first_tx.unwrap_or(p.arrival))));
        DeviceRadioState {
            queued: d.queue.len() - usize::from(inflight.is_some()),
            inflight,
            current_power_w: d.power_w,
            current_max_tx: d.max_tx,
            arrived: d.arrived,
            delivered: d.delivered,
            dropped: d.dropped,
        }
    }

    /// Set the maximum number of transmissions of every device of `gnb`.
    pub fn apply_low_action(&mut self, gnb: usize, retx: &[u32]) -> Result<(), SimError> {
        if gnb >= self.cfg.n_gnbs {
            return Err(SimError::NoSuchGnb(gnb));
        }
        let n = self.cfg.devices_per_gnb[gnb];
        if retx.len() != n {
            return Err(SimError::WrongLength { expected: n, got: retx.len() });
        }
        if let Some(v) = retx.iter().find(|v| !self.cfg.retx_levels.contains(v)) {
            return Err(SimError::NotALevel(v.to_string()));
        }
        let first = self.cfg.first_device(gnb);
        for (d, &m) in self.devices[first..first + n].iter_mut().zip(retx) {
            d.max_tx = m;
        }
        Ok(())
    }

    /// Set the transmit power of every device.
    pub fn apply_high_action(&mut self, powers: &[f64]) -> Result<(), SimError> {
        if powers.len() != self.devices.len() {
            return Err(SimError::WrongLength { expected: self.devices.len(), got: powers.len() });
        }
        if let Some(p) = powers.iter().find(|p| !self.cfg.power_levels_w.contains(p)) {
            return Err(SimError::NotALevel(p.to_string()));
        }
        for (d, &p) in self.devices.iter_mut().zip(powers) {
            d.power_w = p;
        }
        Ok(())
    }

    fn mark_lost(d: &mut Device, at: i64, tb: &TimeBase) {
        if d.y.current() {
            d.y.set(tb.seconds(at), false);
            d.y_down_since = Some(at);
        }
    }

    fn mark_delivered(d: &mut Device, at: i64, tb: &TimeBase) {
        if let Some(down) = d.y_down_since.take() {
            let z_down = if down == 0 { 0 } else { down + tb.survival };
            if z_down < at {
                d.z.set(tb.seconds(z_down), false);
                d.z.set(tb.seconds(at), true);
            }
            d.y.set(tb.seconds(at), true);
        }
    }

    fn gains_now(&self) -> &[f64] {
        let idx = self.field.snapshot_index_at(self.now().to_f64_lossy());
        self.field.snapshot(idx)
    }

    /// Advance one TTI.
    pub fn step_tti(&mut self) {
        let tb = self.tb;
        let t0 = self.now_ticks();
        let t1 = t0 + tb.tti;
        let n_gnbs = self.cfg.n_gnbs;

        if self.field.dynamics().is_some() && tb.gain_update > 0 && t0 > 0 && t0 % tb.gain_update == 0 {
            let seed = self.rng.next_u64();
            let dt = self.cfg.channel.gain_update_period_s;
            self.field = channel::evolve(&self.field, seed, dt).expect("dynamics present");
        }

        // arrivals and deadline expiry
        for d in &mut self.devices {
            while d.next_arrival <= t0 {
                d.queue.push_back(Packet {
                    id: d.next_id,
                    arrival: d.next_arrival,
                    attempts: 0,
                    max_tx: None,
                    first_tx: None,
                    eligible_tti: 0,
                });
                d.next_id += 1;
                d.next_arrival += tb.period;
                d.arrived += 1;
                d.win.arrived += 1;
            }
            while let Some(p) = d.queue.front() {
                if t1 - p.arrival <= tb.delay_bound {
                    break;
                }
                let at = (p.arrival + tb.delay_bound).max(t0);
                let p = d.queue.pop_front().expect("front exists");
                d.dropped += 1;
                d.win.lost += 1;
                d.win.finished_tx += p.attempts as usize;
                Self::mark_lost(d, at, &tb);
            }
            d.win.rlc_buffer.push(d.queue.len() as f64);
            d.win.ttis += 1;
        }

        // scheduling
        let mut scheduled = vec![false; self.devices.len()];
        let cap = self.cfg.capacity_per_tti;
        for b in 0..n_gnbs {
            let first = self.cfg.first_device(b);
            let n = self.cfg.devices_per_gnb[b];
            let ready: Vec<usize> = (0..n)
                .map(|j| first + j)
                .filter(|&u| self.devices[u].queue.front().map(|p| p.eligible_tti <= self.tti).unwrap_or(false))
                .collect();
            if cap == 0 || ready.len() <= cap {
                for u in ready {
                    scheduled[u] = true;
                }
            } else {
                let start = self.rr[b] % n;
                let mut picked = 0;
                for k in 0..n {
                    let u = first + (start + k) % n;
                    if picked < cap && ready.contains(&u) {
                        scheduled[u] = true;
                        picked += 1;
                        self.rr[b] = (start + k + 1) % n;
                    }
                }
            }
        }
        let active: Vec<bool> =
            (0..n_gnbs).map(|b| self.devices.iter().zip(&scheduled).any(|(d, &s)| s && d.gnb == b)).collect();

        // co-channel power per (gnb, rb) this TTI
        let max_rb = self.cfg.devices_per_gnb.iter().copied().max().unwrap_or(0);
        let mut rb_power = vec![None; n_gnbs * max_rb];
        for (u, d) in self.devices.iter().enumerate() {
            if scheduled[u] {
                rb_power[d.gnb * max_rb + d.rb] = Some(d.power_w);
            }
        }

        let n_dev = self.devices.len();
        let noise = self.cfg.radio.noise_power_w;
        let gains = self.gains_now().to_vec();
        let mut powers = vec![0.0; n_gnbs];
        let mut on = vec![false; n_gnbs];
        for u in 0..n_dev {
            let (b, rb, p_own) = {
                let d = &self.devices[u];
                (d.gnb, d.rb, d.power_w)
            };
            for bb in 0..n_gnbs {
                if bb == b {
                    powers[bb] = p_own;
                    on[bb] = true;
                } else {
                    let p = rb_power[bb * max_rb + rb];
                    powers[bb] = p.unwrap_or(0.0);
                    on[bb] = p.is_some() && active[bb];
                }
            }
            let sinr = channel::sinr_db(b, u, &powers, &on, &gains, n_dev, noise).unwrap_or(f64::NEG_INFINITY);
            let g_db = 10.0 * gains[b * n_dev + u].log10();
            let tti = self.tti;
            let d = &mut self.devices[u];
            d.win.sinr_db.push(sinr);
            d.win.path_gain_db.push(g_db);
            if !scheduled[u] {
                continue;
            }
            d.win.rb_used += 1;
            d.win.tx_attempts += 1;
            let p = d.queue.front_mut().expect("scheduled devices have a packet");
            if p.max_tx.is_none() {
                p.max_tx = Some(d.max_tx);
                p.first_tx = Some(t0);
            }
            p.attempts += 1;
            let info = AttemptInfo { device: u, packet_id: p.id, attempt: p.attempts, tti, sinr_db: sinr };
            let err = self
                .link_override
                .as_mut()
                .and_then(|f| f(&info))
                .unwrap_or_else(|| channel::bler(sinr, info.attempt, &self.cfg.radio));
            let failed = self.rng.random::<f64>() < err;
            if !failed {
                let p = d.queue.pop_front().expect("front exists");
                d.delivered += 1;
                d.win.delivered += 1;
                d.win.finished_tx += p.attempts as usize;
                d.win.delay_sum_s += (t1 - p.arrival) as f64 / tb.ticks_per_second as f64;
                Self::mark_delivered(d, t1, &tb);
            } else if p.attempts >= p.max_tx.expect("set on first attempt")
                || t1 + tb.tti * (1 + i64::from(self.cfg.harq_feedback_delay_tti)) - p.arrival > tb.delay_bound
            {
                let p = d.queue.pop_front().expect("front exists");
                d.dropped += 1;
                d.win.lost += 1;
                d.win.finished_tx += p.attempts as usize;
                Self::mark_lost(d, t1, &tb);
            } else {
                p.eligible_tti = tti + 1 + u64::from(self.cfg.harq_feedback_delay_tti);
            }
        }
        self.tti += 1;
    }

    fn close_window(&mut self) -> Vec<WindowMeasurements> {
        let tb = self.tb;
        let now = self.now_ticks();
        let start = tb.seconds(self.window_start);
        let end = tb.seconds(now);
        let window = KpiWindow::new(start, end).expect("window advanced");
        let mut per_gnb: Vec<Vec<DeviceWindow>> = vec![Vec::new(); self.cfg.n_gnbs];
        for (u, d) in self.devices.iter_mut().enumerate() {
            if let Some(down) = d.y_down_since {
                let z_down = if down == 0 { 0 } else { down + tb.survival };
                if z_down < now {
                    d.z.set(tb.seconds(z_down), false);
                }
            }
            let mut win = std::mem::replace(&mut d.win, DeviceWindow { device: u, ..Default::default() });
            win.tally = Some(d.z.tally(window));
            let pts = d.y.points();
            let from = pts.partition_point(|p| p.0 < start);
            win.y_segment = pts[from..].to_vec();
            per_gnb[d.gnb].push(win);
        }
        self.window_start = now;
        let (s, e) = (start.to_f64_lossy(), end.to_f64_lossy());
        per_gnb
            .into_iter()
            .enumerate()
            .map(|(gnb, devices)| WindowMeasurements { gnb, start_s: s, end_s: e, devices })
            .collect()
    }

    /// Advance `n` TTIs and return per-gNB measurements for that span.
    pub fn run_ttis(&mut self, n: u64) -> Vec<WindowMeasurements> {
        assert!(n > 0, "window must contain at least one TTI");
        for _ in 0..n {
            self.step_tti();
        }
        self.close_window()
    }

    /// Advance one low-level step with the actions currently in force.
    pub fn run_window(&mut self) -> Vec<WindowMeasurements> {
        let n = self.cfg.ttis_per_low_step();
        self.run_ttis(n)
    }

    /// Zero-length observation at the current instant: one SINR / gain / buffer
    /// probe per device with every gNB transmitting, counters empty.
    pub fn observe_probe(&self) -> Vec<WindowMeasurements> {
        let n_gnbs = self.cfg.n_gnbs;
        let n_dev = self.devices.len();
        let gains = self.gains_now();
        let t = self.now().to_f64_lossy();
        let max_rb = self.cfg.devices_per_gnb.iter().copied().max().unwrap_or(0);
        let mut rb_power = vec![None; n_gnbs * max_rb];
        for d in &self.devices {
            rb_power[d.gnb * max_rb + d.rb] = Some(d.power_w);
        }
        let mut per_gnb: Vec<Vec<DeviceWindow>> = vec![Vec::new(); n_gnbs];
        for (u, d) in self.devices.iter().enumerate() {
            let powers: Vec<f64> =
                (0..n_gnbs).map(|b| if b == d.gnb { d.power_w } else { rb_power[b * max_rb + d.rb].unwrap_or(0.0) }).collect();
            let on: Vec<bool> = (0..n_gnbs).map(|b| b == d.gnb || rb_power[b * max_rb + d.rb].is_some()).collect();
            let sinr = channel::sinr_db(d.gnb, u, &powers, &on, gains, n_dev, self.cfg.radio.noise_power_w)
                .unwrap_or(f64::NEG_INFINITY);
            per_gnb[d.gnb].push(DeviceWindow {
                device: u,
                sinr_db: vec![sinr],
                path_gain_db: vec![10.0 * gains[d.gnb * n_dev + u].log10()],
                rlc_buffer: vec![d.queue.len() as f64],
                ..Default::default()
            });
        }
        per_gnb
            .into_iter()
            .enumerate()
            .map(|(gnb, devices)| WindowMeasurements { gnb, start_s: t, end_s: t, devices })
            .collect()
    }

    /// `Y` of a device from 0 to now.
    pub fn y_trace(&self, device: usize) -> ExactSignal {
        self.devices[device].y.snapshot(self.now()).expect("builder keeps invariants")
    }

    /// `Z` of a device from 0 to now.
    pub fn z_trace(&self, device: usize) -> ExactSignal {
        let tb = self.tb;
        let d = &self.devices[device];
        let now = self.now_ticks();
        let mut z = d.z.clone();
        if let Some(down) = d.y_down_since {
            let z_down = if down == 0 { 0 } else { down + tb.survival };
            if z_down < now {
                z.set(tb.seconds(z_down), false);
            }
        }
        z.snapshot(self.now()).expect("builder keeps invariants")
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }
}
