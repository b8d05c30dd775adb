//! Step-response measurements on a single pulse (feature set M1).
//!
//! All thresholds act on raw volts. Times are measured from the pulse's
//! opening edge and saturate at the pulse duration when a threshold is never
//! met, so every feature is always finite.

use serde::{Deserialize, Serialize};

use crate::dataset::{V_DOMINANT, V_RECESSIVE};
use crate::error::{Error, Result};
use crate::preprocess::{moving_average, Pulse, PulseKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeFeatures {
    pub t_peak: f64,
    pub ssv: f64,
    pub sse: f64,
    pub pct_os: f64,
    pub t_settle: f64,
    pub t_rise: f64,
    pub t_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeFeatureConfig {
    /// Smoothing window for the steady-state estimate.
    pub ssv_window: usize,
    /// Settling band as a fraction of SSV.
    pub settle_band: f64,
    /// Smoothing window of the settling envelope.
    pub env_window: usize,
}

impl Default for TimeFeatureConfig {
    fn default() -> Self {
        TimeFeatureConfig {
            ssv_window: 20,
            settle_band: 0.05,
            env_window: 10,
        }
    }
}

/// Pulse width between the paired edges.
pub fn peak_time(pulse: &Pulse) -> f64 {
    pulse.duration()
}

/// Smoothed level at the end of the pulse plateau.
pub fn steady_state_value(pulse: &Pulse, window: usize) -> Result<f64> {
    let plateau = pulse.plateau();
    if window == 0 || plateau.len() < window {
        return Err(Error::Feature(format!(
            "pulse plateau of {} samples is shorter than the SSV window {window}",
            plateau.len()
        )));
    }
    let smoothed = moving_average(plateau, window)?;
    Ok(*smoothed.last().expect("non-empty plateau"))
}

pub fn ideal_level(kind: PulseKind) -> f64 {
    match kind {
        PulseKind::Dominant => V_DOMINANT,
        PulseKind::Recessive => V_RECESSIVE,
    }
}

/// Signed deviation of the steady-state value from the ideal bus level.
pub fn steady_state_error(ssv: f64, kind: PulseKind) -> f64 {
    ssv - ideal_level(kind)
}

/// `100 * (peak - ssv) / ssv`, floored at zero. The peak is the largest raw
/// sample between the paired edges.
pub fn percent_overshoot(pulse: &Pulse, ssv: f64) -> Result<f64> {
    if !(ssv > 0.0) {
        return Err(Error::Feature(format!("overshoot needs ssv > 0, got {ssv}")));
    }
    let peak = pulse.body().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((100.0 * (peak - ssv) / ssv).max(0.0))
}

/// Time of the largest sample between the paired edges.
pub fn overshoot_peak_time(pulse: &Pulse) -> f64 {
    let body = pulse.body();
    let (idx, _) = body
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    idx as f64 / pulse.fs
}

/// Time after which the smoothed envelope of `|v - ssv|` stays within
/// `band * ssv` for the rest of the plateau.
pub fn settling_time(pulse: &Pulse, ssv: f64, band: f64, env_window: usize) -> Result<f64> {
    if !(band > 0.0 && band <= 0.5) {
        return Err(Error::Config(format!("settling band must be in (0, 0.5], got {band}")));
    }
    let plateau = pulse.plateau();
    let deviation: Vec<f64> = plateau.iter().map(|v| (v - ssv).abs()).collect();
    let envelope = moving_average(&deviation, env_window.clamp(1, deviation.len()))?;
    let limit = band * ssv.abs();
    Ok(match envelope.iter().rposition(|&e| e > limit) {
        None => 0.0,
        Some(last) if last + 1 >= plateau.len() => pulse.duration(),
        Some(last) => (last + 1) as f64 / pulse.fs,
    })
}

fn first_reach(pulse: &Pulse, level: f64) -> f64 {
    match pulse.plateau().iter().position(|&v| v >= level) {
        Some(i) => i as f64 / pulse.fs,
        None => pulse.duration(),
    }
}

/// Time to first reach SSV.
pub fn rise_time(pulse: &Pulse, ssv: f64) -> f64 {
    first_reach(pulse, ssv)
}

/// Time to first reach half of SSV.
pub fn delay_time(pulse: &Pulse, ssv: f64) -> f64 {
    first_reach(pulse, 0.5 * ssv)
}

pub fn extract_time_features(pulse: &Pulse, cfg: &TimeFeatureConfig) -> Result<TimeFeatures> {
    let ssv = steady_state_value(pulse, cfg.ssv_window)?;
    Ok(TimeFeatures {
        t_peak: peak_time(pulse),
        ssv,
        sse: steady_state_error(ssv, pulse.kind),
        pct_os: percent_overshoot(pulse, ssv)?,
        t_settle: settling_time(pulse, ssv, cfg.settle_band, cfg.env_window)?,
        t_rise: rise_time(pulse, ssv),
        t_delay: delay_time(pulse, ssv),
    })
}
