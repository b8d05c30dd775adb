//! Trace conditioning: smoothing, edge detection, pulse segmentation, and
//! out-of-bound edge rejection.

use serde::{Deserialize, Serialize};

use crate::dataset::SignalTrace;
use crate::error::{Error, Result};

/// Causal moving average. Output `i` is the mean of `samples[i+1-window..=i]`,
/// truncated at the start of the signal.
pub fn moving_average(samples: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Config("moving-average window must be >= 1".into()));
    }
    if window > samples.len() {
        return Err(Error::Config(format!(
            "moving-average window {window} exceeds signal length {}",
            samples.len()
        )));
    }
    let out = (0..samples.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            samples[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect();
    Ok(out)
}

/// How the DC bias removed before threshold crossing is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasMethod {
    /// Arithmetic mean of the whole trace.
    Mean,
    /// Midpoint of the 5th and 95th percentile levels.
    #[default]
    PercentileMidpoint,
}

impl BiasMethod {
    pub fn estimate(self, samples: &[f64]) -> f64 {
        match self {
            BiasMethod::Mean => samples.iter().sum::<f64>() / samples.len() as f64,
            BiasMethod::PercentileMidpoint => {
                let mut sorted = samples.to_vec();
                sorted.sort_by(f64::total_cmp);
                let at = |q: f64| sorted[(q * (sorted.len() - 1) as f64).round() as usize];
                0.5 * (at(0.05) + at(0.95))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeConfig {
    /// Crossing threshold around the bias (V).
    pub threshold: f64,
    /// Smoothing window; also the merge distance for repeated crossings.
    pub window: usize,
    pub bias: BiasMethod,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            threshold: 0.2,
            window: 6,
            bias: BiasMethod::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeSet {
    pub rising_idx: Vec<usize>,
    pub falling_idx: Vec<usize>,
    pub rising_t: Vec<f64>,
    pub falling_t: Vec<f64>,
}

impl EdgeSet {
    pub fn from_indices(rising_idx: Vec<usize>, falling_idx: Vec<usize>, fs: f64) -> Self {
        let rising_t = rising_idx.iter().map(|&i| i as f64 / fs).collect();
        let falling_t = falling_idx.iter().map(|&i| i as f64 / fs).collect();
        EdgeSet {
            rising_idx,
            falling_idx,
            rising_t,
            falling_t,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rising_idx.is_empty() && self.falling_idx.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rising_idx.len() + self.falling_idx.len()
    }
}

/// Finds rising and falling threshold crossings of the smoothed, de-biased trace.
pub fn detect_edges(trace: &SignalTrace, cfg: &EdgeConfig) -> Result<EdgeSet> {
    let smoothed = moving_average(trace.samples(), cfg.window)?;
    let bias = cfg.bias.estimate(trace.samples());
    let up = |v: f64| v - bias - cfg.threshold;
    let down = |v: f64| v - bias + cfg.threshold;

    let mut rising = Vec::new();
    let mut falling = Vec::new();
    for i in 1..smoothed.len() {
        let (prev, cur) = (smoothed[i - 1], smoothed[i]);
        if up(prev) < 0.0 && up(cur) >= 0.0 && !within(&rising, i, cfg.window) {
            rising.push(i);
        }
        if down(prev) > 0.0 && down(cur) <= 0.0 && !within(&falling, i, cfg.window) {
            falling.push(i);
        }
    }
    Ok(EdgeSet::from_indices(rising, falling, trace.fs()))
}

fn within(edges: &[usize], i: usize, window: usize) -> bool {
    edges.last().is_some_and(|&last| i - last < window)
}

/// Keeps an edge only when its gap to the preceding detected edge is at least
/// `expected_period`. The first edge of each direction is always kept.
pub fn reject_out_of_bound(edges: &EdgeSet, expected_period: f64) -> EdgeSet {
    let (rising_idx, rising_t) = filter_periods(&edges.rising_idx, &edges.rising_t, expected_period);
    let (falling_idx, falling_t) =
        filter_periods(&edges.falling_idx, &edges.falling_t, expected_period);
    EdgeSet {
        rising_idx,
        falling_idx,
        rising_t,
        falling_t,
    }
}

fn filter_periods(idx: &[usize], t: &[f64], expected: f64) -> (Vec<usize>, Vec<f64>) {
    // Periods are measured against the unfiltered neighbour; the first edge
    // takes the expected period itself and therefore always passes.
    let min_gap = expected * (1.0 - 1e-9);
    (0..idx.len())
        .filter(|&k| k == 0 || t[k] - t[k - 1] >= min_gap)
        .map(|k| (idx[k], t[k]))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Dominant,
    Recessive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PulseConfig {
    /// Samples kept after the closing edge.
    pub tail_margin: usize,
    /// Samples before the closing edge that are excluded from plateau
    /// measurements; they absorb the detector's smoothing lag.
    pub fall_guard: usize,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            tail_margin: 10,
            fall_guard: 12,
        }
    }
}

/// One segmented pulse. `samples[0]` is the trace sample at the opening edge
/// (`i_rise` for dominant pulses, `i_fall` for recessive ones).
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub i_rise: usize,
    pub i_fall: usize,
    pub samples: Vec<f64>,
    pub fs: f64,
    pub kind: PulseKind,
    pub fall_guard: usize,
}

impl Pulse {
    /// Dominant pulse cut from a trace at known edges.
    pub fn dominant(trace: &[f64], fs: f64, i_rise: usize, i_fall: usize, cfg: &PulseConfig) -> Self {
        let end = (i_fall + cfg.tail_margin + 1).min(trace.len());
        Pulse {
            i_rise,
            i_fall,
            samples: trace[i_rise..end].to_vec(),
            fs,
            kind: PulseKind::Dominant,
            fall_guard: cfg.fall_guard,
        }
    }

    pub fn recessive(trace: &[f64], fs: f64, i_fall: usize, i_rise: usize, cfg: &PulseConfig) -> Self {
        let end = (i_rise + cfg.tail_margin + 1).min(trace.len());
        Pulse {
            i_rise,
            i_fall,
            samples: trace[i_fall..end].to_vec(),
            fs,
            kind: PulseKind::Recessive,
            fall_guard: cfg.fall_guard,
        }
    }

    /// Samples between the opening and closing edge.
    pub fn width(&self) -> usize {
        self.i_rise.abs_diff(self.i_fall)
    }

    pub fn duration(&self) -> f64 {
        self.width() as f64 / self.fs
    }

    /// Local index of the closing edge, clamped to the available samples.
    pub fn closing_index(&self) -> usize {
        self.width().min(self.samples.len().saturating_sub(1))
    }

    /// Samples from the opening edge up to the closing edge, inclusive.
    pub fn body(&self) -> &[f64] {
        &self.samples[..=self.closing_index()]
    }

    /// Settled portion of the pulse: opening edge up to `fall_guard` samples
    /// before the closing edge. Never empty for a non-empty pulse.
    pub fn plateau(&self) -> &[f64] {
        let end = self.closing_index().saturating_sub(self.fall_guard).max(1);
        &self.samples[..end.min(self.samples.len())]
    }
}

/// Pairs each rising edge with the first falling edge after it. A rising edge
/// whose falling partner lies beyond the next rising edge is dropped, as are
/// trailing unpaired edges. Recessive pulses fill the gaps between consecutive
/// dominant pulses. The result is ordered by start index.
pub fn pair_edges(edges: &EdgeSet, trace: &SignalTrace, cfg: &PulseConfig) -> Vec<Pulse> {
    let rising = &edges.rising_idx;
    let falling = &edges.falling_idx;
    let mut pairs = Vec::new();
    let mut f = 0;
    for (k, &r) in rising.iter().enumerate() {
        while f < falling.len() && falling[f] <= r {
            f += 1;
        }
        let Some(&fall) = falling.get(f) else { break };
        if rising.get(k + 1).is_some_and(|&next| next < fall) {
            continue;
        }
        pairs.push((r, fall));
    }

    let samples = trace.samples();
    let mut pulses = Vec::with_capacity(pairs.len() * 2);
    for (n, &(r, fall)) in pairs.iter().enumerate() {
        pulses.push(Pulse::dominant(samples, trace.fs(), r, fall, cfg));
        if let Some(&(next_r, _)) = pairs.get(n + 1) {
            pulses.push(Pulse::recessive(samples, trace.fs(), fall, next_r, cfg));
        }
    }
    pulses
}

/// Full segmentation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub edge: EdgeConfig,
    /// Minimum accepted spacing between same-direction edges (s).
    pub expected_period: f64,
    pub pulse: PulseConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            edge: EdgeConfig::default(),
            expected_period: 0.9 * 50e-6,
            pulse: PulseConfig::default(),
        }
    }
}

/// Detect, reject, and pair: returns every pulse of the trace.
pub fn segment(trace: &SignalTrace, cfg: &PreprocessConfig) -> Result<Vec<Pulse>> {
    if !(cfg.expected_period > 0.0) {
        return Err(Error::Config("expected_period must be > 0".into()));
    }
    let edges = detect_edges(trace, &cfg.edge)?;
    let clean = reject_out_of_bound(&edges, cfg.expected_period);
    Ok(pair_edges(&clean, trace, &cfg.pulse))
}

pub fn dominant_pulses(pulses: Vec<Pulse>) -> Vec<Pulse> {
    pulses
        .into_iter()
        .filter(|p| p.kind == PulseKind::Dominant)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RecordMeta;

    fn trace(samples: Vec<f64>, fs: f64) -> SignalTrace {
        SignalTrace::new(samples, fs, RecordMeta::default()).unwrap()
    }

    #[test]
    fn moving_average_examples() {
        let out = moving_average(&[0.0, 0.0, 0.0, 6.0, 6.0, 6.0], 3).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0, 2.0, 4.0, 6.0]);

        let x = [1.5, -2.0, 3.25, 8.0];
        assert_eq!(moving_average(&x, 1).unwrap(), x.to_vec());

        let c = vec![3.3; 50];
        for w in [1, 2, 6, 20, 50] {
            assert!(moving_average(&c, w)
                .unwrap()
                .iter()
                .all(|v| (v - 3.3).abs() < 1e-12));
        }
        assert!(matches!(moving_average(&x, 5), Err(Error::Config(_))));
        assert!(matches!(moving_average(&x, 0), Err(Error::Config(_))));
    }

    #[test]
    fn constant_trace_has_no_edges() {
        let t = trace(vec![2.5; 400], 2e6);
        for bias in [BiasMethod::Mean, BiasMethod::PercentileMidpoint] {
            let cfg = EdgeConfig {
                bias,
                ..Default::default()
            };
            assert!(detect_edges(&t, &cfg).unwrap().is_empty());
        }
    }

    #[test]
    fn single_step_gives_one_rising_edge() {
        let mut s = vec![2.5; 200];
        s.extend(vec![3.5; 200]);
        let edges = detect_edges(&trace(s, 2e6), &EdgeConfig::default()).unwrap();
        assert_eq!(edges.rising_idx.len(), 1);
        assert!(edges.falling_idx.is_empty());
        // smoothed value passes 3.2 on the 5th sample of the step
        assert_eq!(edges.rising_idx[0], 204);
        assert!((edges.rising_t[0] - 204.0 / 2e6).abs() < 1e-18);
    }

    fn edge_set_from_times_us(times: &[f64]) -> EdgeSet {
        let fs = 1e6;
        let idx: Vec<usize> = times.iter().map(|t| *t as usize).collect();
        EdgeSet::from_indices(idx.clone(), idx, fs)
    }

    #[test]
    fn rejection_drops_edge_after_short_gap() {
        // periods 50, 50, 8, 50 us
        let edges = edge_set_from_times_us(&[0.0, 50.0, 100.0, 108.0, 158.0]);
        let out = reject_out_of_bound(&edges, 45e-6);
        assert_eq!(out.rising_idx, vec![0, 50, 100, 158]);
        assert_eq!(out.falling_idx, vec![0, 50, 100, 158]);
        assert_eq!(reject_out_of_bound(&out, 45e-6), out);
    }

    #[test]
    fn rejection_noop_and_single_edge() {
        let edges = edge_set_from_times_us(&[0.0, 50.0, 100.0, 150.0]);
        assert_eq!(reject_out_of_bound(&edges, 50e-6), edges);
        let one = edge_set_from_times_us(&[7.0]);
        assert_eq!(reject_out_of_bound(&one, 1.0), one);
        assert!(reject_out_of_bound(&EdgeSet::default(), 1e-3).is_empty());
    }

    #[test]
    fn pairing_boundaries() {
        let t = trace(vec![2.5; 100], 1e6);
        let cfg = PulseConfig::default();
        assert!(pair_edges(&EdgeSet::default(), &t, &cfg).is_empty());

        // second rising edge has no falling partner
        let edges = EdgeSet::from_indices(vec![10, 60], vec![40], 1e6);
        let pulses = pair_edges(&edges, &t, &cfg);
        assert_eq!(pulses.len(), 1);
        assert_eq!((pulses[0].i_rise, pulses[0].i_fall), (10, 40));

        // two rises before one fall: the earlier one is an orphan
        let edges = EdgeSet::from_indices(vec![10, 20, 60], vec![40, 90], 1e6);
        let pulses = dominant_pulses(pair_edges(&edges, &t, &cfg));
        let pairs: Vec<_> = pulses.iter().map(|p| (p.i_rise, p.i_fall)).collect();
        assert_eq!(pairs, vec![(20, 40), (60, 90)]);
    }

    #[test]
    fn alternating_edges_give_dominant_and_recessive_pulses() {
        let t = trace(vec![2.5; 400], 1e6);
        let rising: Vec<usize> = (0..12).map(|k| 10 + 30 * k).collect();
        let falling: Vec<usize> = rising.iter().map(|r| r + 25).collect();
        let pulses = pair_edges(&EdgeSet::from_indices(rising, falling, 1e6), &t, &PulseConfig::default());
        let dom = pulses.iter().filter(|p| p.kind == PulseKind::Dominant).count();
        let rec = pulses.iter().filter(|p| p.kind == PulseKind::Recessive).count();
        assert_eq!((dom, rec), (12, 11));
        let rec0 = &pulses[1];
        assert_eq!((rec0.i_fall, rec0.i_rise, rec0.width()), (35, 40, 5));
    }

    #[test]
    fn pulse_slices() {
        let samples: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let cfg = PulseConfig {
            tail_margin: 3,
            fall_guard: 2,
        };
        let p = Pulse::dominant(&samples, 1.0, 10, 20, &cfg);
        assert_eq!(p.samples.first(), Some(&10.0));
        assert_eq!(p.samples.last(), Some(&23.0));
        assert_eq!(p.body().last(), Some(&20.0));
        assert_eq!(p.plateau().len(), 8);
        // tail clamped at trace end
        let q = Pulse::dominant(&samples, 1.0, 90, 98, &cfg);
        assert_eq!(q.samples.len(), 10);
    }
}
