//! Fixed-layout, normalized state vectors built from window measurements.

use thiserror::Error;

use crate::netsim::{DeviceWindow, WindowMeasurements};

/// Identifier of the per-device ordering contract below.
pub const LAYOUT_ID: &str = "device17/v1";

/// Entries per device.
pub const DEVICE_WIDTH: usize = 17;

/// Feature names in layout order.
pub const FEATURE_NAMES: [&str; DEVICE_WIDTH] = [
    "plr_mean",
    "downtime_mean",
    "delay_mean",
    "harq_tx_mean",
    "rb_used_mean",
    "sinr_db_mean",
    "sinr_db_median",
    "sinr_db_p95",
    "sinr_db_p5",
    "path_gain_db_mean",
    "path_gain_db_median",
    "path_gain_db_p95",
    "path_gain_db_p5",
    "rlc_buffer_mean",
    "rlc_buffer_median",
    "rlc_buffer_p95",
    "rlc_buffer_p5",
];

/// Normalization family of each feature (index into [`NormalizationSpec::ranges`]).
const FAMILY: [usize; DEVICE_WIDTH] = [0, 1, 2, 3, 4, 5, 5, 5, 5, 6, 6, 6, 6, 7, 7, 7, 7];

const FAMILY_NAMES: [&str; 8] = ["plr", "downtime", "delay", "harq_tx", "rb_used", "sinr_db", "path_gain_db", "rlc_buffer"];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("device {0} has no samples in the window")]
    EmptySamples(usize),
    #[error("expected {expected} low-level windows, got {got}")]
    WindowCount { expected: usize, got: usize },
    #[error("windows do not line up: {0}")]
    Mismatch(String),
}

/// Affine map of each feature family from `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationSpec {
    bounds: [(f64, f64); 8],
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        Self {
            bounds: [
                (0.0, 1.0),
                (0.0, 0.1),
                (0.0, 0.0025),
                (0.0, 5.0),
                (0.0, 1.0),
                (-10.0, 40.0),
                (-120.0, -50.0),
                (0.0, 4.0),
            ],
        }
    }
}

impl NormalizationSpec {
    /// Update from a config key with the `feat_` prefix removed, e.g. `sinr_db_min`.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let (name, is_min) = if let Some(n) = key.strip_suffix("_min") {
            (n, true)
        } else if let Some(n) = key.strip_suffix("_max") {
            (n, false)
        } else {
            return Err("expected feat_<name>_min or feat_<name>_max".into());
        };
        let idx = FAMILY_NAMES.iter().position(|f| *f == name).ok_or_else(|| format!("unknown feature {name:?}"))?;
        let x: f64 = v.trim().parse().map_err(|_| format!("not a number: {v:?}"))?;
        if !x.is_finite() {
            return Err("must be finite".into());
        }
        if is_min {
            self.bounds[idx].0 = x;
        } else {
            self.bounds[idx].1 = x;
        }
        Ok(())
    }

    pub fn ranges(&self) -> impl Iterator<Item = (&'static str, f64, f64)> + '_ {
        FAMILY_NAMES.iter().zip(&self.bounds).map(|(n, &(lo, hi))| (*n, lo, hi))
    }

    /// Scale feature `idx` of the device layout, clamping to `[-1, 1]`.
    pub fn scale(&self, idx: usize, x: f64) -> f64 {
        let (lo, hi) = self.bounds[FAMILY[idx]];
        let y = 2.0 * (x - lo) / (hi - lo) - 1.0;
        if y.is_nan() {
            -1.0
        } else {
            y.clamp(-1.0, 1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout_id: &'static str,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn concat(parts: impl IntoIterator<Item = FeatureVector>) -> FeatureVector {
        let values = parts.into_iter().flat_map(|p| p.values).collect();
        FeatureVector { values, layout_id: LAYOUT_ID }
    }
}

/// Nearest-rank percentile of an ascending slice (`p` in percent).
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// `[mean, median, p95, p5]` of a nonempty sample list.
pub fn summary(samples: &[f64]) -> [f64; 4] {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    [mean, nearest_rank(&s, 50.0), nearest_rank(&s, 95.0), nearest_rank(&s, 5.0)]
}

/// Unscaled device features in layout order.
pub fn raw_device_features(w: &DeviceWindow) -> Result<[f64; DEVICE_WIDTH], FeatureError> {
    if w.sinr_db.is_empty() || w.path_gain_db.is_empty() || w.rlc_buffer.is_empty() {
        return Err(FeatureError::EmptySamples(w.device));
    }
    let mut out = [0.0; DEVICE_WIDTH];
    out[0] = w.packet_loss_rate();
    out[1] = w.mean_downtime_s();
    out[2] = w.mean_delay_s();
    out[3] = w.mean_harq_tx();
    out[4] = w.mean_rb_used();
    for (k, samples) in [&w.sinr_db, &w.path_gain_db, &w.rlc_buffer].into_iter().enumerate() {
        out[5 + 4 * k..9 + 4 * k].copy_from_slice(&summary(samples));
    }
    Ok(out)
}

pub fn device_features(w: &DeviceWindow, norm: &NormalizationSpec) -> Result<FeatureVector, FeatureError> {
    let raw = raw_device_features(w)?;
    let values = raw.iter().enumerate().map(|(i, &x)| norm.scale(i, x)).collect();
    Ok(FeatureVector { values, layout_id: LAYOUT_ID })
}

/// State of one low-level agent: its devices' blocks in device order.
pub fn assemble_low(m: &WindowMeasurements, norm: &NormalizationSpec) -> Result<FeatureVector, FeatureError> {
    let parts = m.devices.iter().map(|d| device_features(d, norm)).collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureVector::concat(parts))
}

/// Merge `c` consecutive windows (each holding every gNB) into one window per gNB.
pub fn merge_windows(windows: &[Vec<WindowMeasurements>], c: usize) -> Result<Vec<WindowMeasurements>, FeatureError> {
    if windows.len() != c {
        return Err(FeatureError::WindowCount { expected: c, got: windows.len() });
    }
    let n_gnbs = windows.first().map(Vec::len).unwrap_or(0);
    (0..n_gnbs)
        .map(|b| {
            let parts: Vec<WindowMeasurements> = windows
                .iter()
                .map(|w| w.get(b).cloned().ok_or_else(|| FeatureError::Mismatch(format!("gnb {b} missing"))))
                .collect::<Result<_, _>>()?;
            WindowMeasurements::merge(&parts).ok_or_else(|| FeatureError::Mismatch(format!("gnb {b} windows differ")))
        })
        .collect()
}

/// State of the high-level agent: every device, statistics over the union of
/// the `c` low-level windows.
pub fn assemble_high(
    windows: &[Vec<WindowMeasurements>],
    c: usize,
    norm: &NormalizationSpec,
) -> Result<FeatureVector, FeatureError> {
    let merged = merge_windows(windows, c)?;
    let parts = merged.iter().map(|m| assemble_low(m, norm)).collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureVector::concat(parts))
}
