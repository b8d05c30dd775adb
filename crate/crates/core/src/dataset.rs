//! Voltage traces, record metadata, and the synthetic multi-ECU corpus.
//!
//! A [`SignalTrace`] is a uniformly sampled CAN-High voltage series. Traces are
//! stored as two-column CSV (`time_s,voltage_v`) with shortest round-trip
//! decimal formatting, so a store/load cycle is bit-exact.
//!
//! The synthetic generator drives a linear second-order channel with an ideal
//! recessive/dominant bit waveform. Every transition contributes a scaled
//! underdamped step response, so a dominant plateau that starts from a settled
//! recessive level follows the closed form exactly.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Nominal CAN-High recessive level (V).
pub const V_RECESSIVE: f64 = 2.5;
/// Nominal CAN-High dominant level (V).
pub const V_DOMINANT: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMedium {
    #[default]
    TwistedPair,
    Ribbon,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RecordMeta {
    pub can_id: String,
    pub channel_length_m: f64,
    pub channel_medium: ChannelMedium,
    pub ecu_record_id: String,
    pub filepath: String,
    pub ecu_label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    samples: Vec<f64>,
    fs: f64,
    pub meta: RecordMeta,
}

impl SignalTrace {
    pub fn new(samples: Vec<f64>, fs: f64, meta: RecordMeta) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Data(format!(
                "trace needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Data(format!("sampling frequency must be > 0, got {fs}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample at index {i}")));
        }
        Ok(SignalTrace { samples, fs, meta })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mutable access for tests that inject glitches; finiteness is the
    /// caller's responsibility.
    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }
}

/// Channel characteristics of one synthetic ECU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcuProfile {
    pub zeta: f64,
    /// Natural frequency in rad/s.
    pub omega_n: f64,
    pub v_rec: f64,
    pub v_dom: f64,
    pub noise_sigma: f64,
    /// Standard deviation of the edge timing jitter in seconds.
    pub jitter_sigma: f64,
}

impl EcuProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::Config(format!(
                "profile zeta must be in (0,1), got {}",
                self.zeta
            )));
        }
        if !(self.omega_n.is_finite() && self.omega_n > 0.0) {
            return Err(Error::Config(format!(
                "profile omega_n must be > 0, got {}",
                self.omega_n
            )));
        }
        if !(self.v_dom > self.v_rec) {
            return Err(Error::Config(format!(
                "profile v_dom ({}) must exceed v_rec ({})",
                self.v_dom, self.v_rec
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.jitter_sigma >= 0.0) {
            return Err(Error::Config("noise and jitter sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Peak overshoot of the normalized step response, as a fraction.
    pub fn overshoot_ratio(&self) -> f64 {
        (-std::f64::consts::PI * self.zeta / (1.0 - self.zeta * self.zeta).sqrt()).exp()
    }
}

/// Unit step response of an underdamped second-order system.
pub fn step_response(zeta: f64, omega_n: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let root = (1.0 - zeta * zeta).sqrt();
    let omega_d = omega_n * root;
    let phi = zeta.acos();
    1.0 - (-zeta * omega_n * t).exp() * (omega_d * t + phi).sin() / root
}

/// Bit-train timing shared by the generator and its oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitTiming {
    pub n_bits: usize,
    /// Seconds per bit.
    pub bit_period: f64,
    /// Dominant fraction of each bit period.
    pub duty: f64,
    pub fs: f64,
}

impl BitTiming {
    pub fn validate(&self) -> Result<()> {
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::Config(format!("duty must be in (0,1), got {}", self.duty)));
        }
        if !(self.fs > 0.0 && self.bit_period > 0.0) {
            return Err(Error::Config("fs and bit_period must be > 0".into()));
        }
        if self.fs * self.bit_period < 20.0 {
            return Err(Error::Config(format!(
                "need >= 20 samples per bit, got {:.3}",
                self.fs * self.bit_period
            )));
        }
        if self.n_bits == 0 {
            return Err(Error::Config("n_bits must be >= 1".into()));
        }
        Ok(())
    }

    /// Recessive lead-in before the first dominant bit (s).
    pub fn lead_in(&self) -> f64 {
        (1.0 - self.duty) * self.bit_period
    }

    /// Total trace duration (s).
    pub fn duration(&self) -> f64 {
        self.lead_in() + self.n_bits as f64 * self.bit_period
    }

    pub fn n_samples(&self) -> usize {
        (self.duration() * self.fs).round() as usize
    }

    /// Nominal (jitter-free) rising and falling transition times.
    pub fn nominal_edges(&self) -> (Vec<f64>, Vec<f64>) {
        let lead = self.lead_in();
        let rise = (0..self.n_bits)
            .map(|k| lead + k as f64 * self.bit_period)
            .collect();
        let fall = (0..self.n_bits)
            .map(|k| lead + k as f64 * self.bit_period + self.duty * self.bit_period)
            .collect();
        (rise, fall)
    }
}

/// A synthesized trace together with the transition times that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    pub trace: SignalTrace,
    pub rise_times: Vec<f64>,
    pub fall_times: Vec<f64>,
}

impl SyntheticTrace {
    /// Index of the first sample at or after each true rising transition.
    pub fn rise_indices(&self) -> Vec<usize> {
        to_indices(&self.rise_times, self.trace.fs())
    }

    pub fn fall_indices(&self) -> Vec<usize> {
        to_indices(&self.fall_times, self.trace.fs())
    }
}

fn to_indices(times: &[f64], fs: f64) -> Vec<usize> {
    times.iter().map(|t| (t * fs - 1e-9).ceil().max(0.0) as usize).collect()
}

/// Synthesizes a recessive/dominant pulse train through the profile's channel.
pub fn synthesize_trace(
    profile: &EcuProfile,
    n_bits: usize,
    bit_period: f64,
    duty: f64,
    fs: f64,
    seed: u64,
) -> Result<SignalTrace> {
    let timing = BitTiming {
        n_bits,
        bit_period,
        duty,
        fs,
    };
    Ok(synthesize_with_edges(profile, &timing, seed, RecordMeta::default())?.trace)
}

pub fn synthesize_with_edges(
    profile: &EcuProfile,
    timing: &BitTiming,
    seed: u64,
    meta: RecordMeta,
) -> Result<SyntheticTrace> {
    profile.validate()?;
    timing.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rise_times, mut fall_times) = timing.nominal_edges();
    if profile.jitter_sigma > 0.0 {
        let jitter = Normal::new(0.0, profile.jitter_sigma)
            .map_err(|e| Error::Config(format!("jitter distribution: {e}")))?;
        for k in 0..timing.n_bits {
            rise_times[k] += jitter.sample(&mut rng);
            fall_times[k] += jitter.sample(&mut rng);
        }
    }

    let step = profile.v_dom - profile.v_rec;
    let n = timing.n_samples();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / timing.fs;
        let mut v = profile.v_rec;
        for (&tr, &tf) in rise_times.iter().zip(&fall_times) {
            if t <= tr {
                break;
            }
            v += step * step_response(profile.zeta, profile.omega_n, t - tr);
            v -= step * step_response(profile.zeta, profile.omega_n, t - tf);
        }
        samples.push(v);
    }

    if profile.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, profile.noise_sigma)
            .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
        for v in samples.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }

    Ok(SyntheticTrace {
        trace: SignalTrace::new(samples, timing.fs, meta)?,
        rise_times,
        fall_times,
    })
}

/// Reads a `time_s,voltage_v` CSV trace.
pub fn load_trace(path: &Path, fs: f64, meta: RecordMeta) -> Result<SignalTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "voltage_v" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected header `time_s,voltage_v`".into(),
        });
    }

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let voltage: f64 = record[1].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("voltage `{}` is not a number", &record[1]),
        })?;
        if !voltage.is_finite() {
            return Err(Error::Data(format!(
                "{}:{line}: non-finite voltage `{}`",
                path.display(),
                &record[1]
            )));
        }
        samples.push(voltage);
    }

    if samples.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "trace contains no samples".into(),
        });
    }
    SignalTrace::new(samples, fs, meta)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(1, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

/// Writes a trace as `time_s,voltage_v` CSV.
pub fn store_trace(trace: &SignalTrace, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(trace.len() * 32);
    out.push_str("time_s,voltage_v\n");
    for (i, v) in trace.samples().iter().enumerate() {
        let t = i as f64 / trace.fs();
        out.push_str(&format!("{t},{v}\n"));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub can_id: String,
    pub channel_length_m: f64,
    pub channel_medium: ChannelMedium,
    pub ecu_record_id: String,
    pub ecu_label: usize,
}

impl ManifestRecord {
    pub fn meta(&self) -> RecordMeta {
        RecordMeta {
            can_id: self.can_id.clone(),
            channel_length_m: self.channel_length_m,
            channel_medium: self.channel_medium,
            ecu_record_id: self.ecu_record_id.clone(),
            filepath: self.path.clone(),
            ecu_label: self.ecu_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub classes: Vec<String>,
    pub records: Vec<ManifestRecord>,
}

pub fn class_name(label: usize) -> String {
    format!("ecu{label}")
}

/// Collects records into a manifest. Labels must cover `0..K` contiguously.
pub fn build_manifest(records: Vec<(PathBuf, RecordMeta)>) -> Result<Manifest> {
    if records.is_empty() {
        return Err(Error::Manifest("no records".into()));
    }
    let mut ids = BTreeSet::new();
    for (_, meta) in &records {
        if !ids.insert(meta.ecu_record_id.as_str()) {
            return Err(Error::Manifest(format!(
                "duplicate ecu_record_id `{}`",
                meta.ecu_record_id
            )));
        }
    }
    let labels: BTreeSet<usize> = records.iter().map(|(_, m)| m.ecu_label).collect();
    if let Some(missing) = (0..labels.len()).find(|l| !labels.contains(l)) {
        return Err(Error::Manifest(format!(
            "class {missing} has no records (labels must be contiguous from 0)"
        )));
    }

    let records = records
        .into_iter()
        .map(|(path, meta)| ManifestRecord {
            path: path.to_string_lossy().into_owned(),
            can_id: meta.can_id,
            channel_length_m: meta.channel_length_m,
            channel_medium: meta.channel_medium,
            ecu_record_id: meta.ecu_record_id,
            ecu_label: meta.ecu_label,
        })
        .collect();
    Ok(Manifest {
        classes: labels.into_iter().map(class_name).collect(),
        records,
    })
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        if let Some(r) = manifest
            .records
            .iter()
            .find(|r| r.ecu_label >= manifest.classes.len())
        {
            return Err(Error::Manifest(format!(
                "record `{}` has label {} but only {} classes are declared",
                r.ecu_record_id,
                r.ecu_label,
                manifest.classes.len()
            )));
        }
        Ok(manifest)
    }
}

/// Parameters of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub fs: f64,
    pub bit_period: f64,
    pub duty: f64,
    pub n_bits: usize,
    pub records_per_ecu: usize,
    pub profiles: Vec<EcuProfile>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            fs: 2.0e6,
            bit_period: 50e-6,
            duty: 0.86,
            n_bits: 12,
            records_per_ecu: 30,
            profiles: default_profiles().to_vec(),
        }
    }
}

impl GenerationConfig {
    pub fn timing(&self) -> BitTiming {
        BitTiming {
            n_bits: self.n_bits,
            bit_period: self.bit_period,
            duty: self.duty,
            fs: self.fs,
        }
    }
}

/// The seven stand-in ECU channels.
///
/// Damping spans 0.3..0.8 and natural frequency a half decade (about
/// 60 kHz to 190 kHz); level offsets stay within 50 mV of nominal.
pub fn default_profiles() -> [EcuProfile; 7] {
    let two_pi = 2.0 * std::f64::consts::PI;
    let p = |zeta: f64, f_n: f64, dv_rec: f64, dv_dom: f64, noise: f64| EcuProfile {
        zeta,
        omega_n: two_pi * f_n,
        v_rec: V_RECESSIVE + dv_rec,
        v_dom: V_DOMINANT + dv_dom,
        noise_sigma: noise,
        jitter_sigma: 20e-9,
    };
    [
        p(0.30, 150e3, 0.010, -0.020, 0.030),
        p(0.38, 95e3, -0.010, 0.015, 0.024),
        p(0.46, 190e3, 0.005, 0.000, 0.036),
        p(0.54, 60e3, 0.000, -0.030, 0.020),
        p(0.62, 120e3, -0.015, 0.030, 0.042),
        p(0.70, 75e3, 0.015, 0.010, 0.027),
        p(0.78, 165e3, -0.005, -0.010, 0.033),
    ]
}

/// Per-record seed derived from the master seed, independent of iteration order.
pub fn record_seed(master: u64, ecu: usize, record: usize) -> u64 {
    derive_seed(derive_seed(master, ecu as u64), record as u64)
}

/// Generates the labeled corpus in memory, in (ecu, record) order.
pub fn synthesize_corpus(cfg: &GenerationConfig, seed: u64) -> Result<Vec<SignalTrace>> {
    let timing = cfg.timing();
    let mut traces = Vec::with_capacity(cfg.profiles.len() * cfg.records_per_ecu);
    for (ecu, profile) in cfg.profiles.iter().enumerate() {
        for rec in 0..cfg.records_per_ecu {
            let meta = corpus_meta(ecu, rec);
            let synth =
                synthesize_with_edges(profile, &timing, record_seed(seed, ecu, rec), meta)?;
            traces.push(synth.trace);
        }
    }
    Ok(traces)
}

/// Metadata assigned to synthetic record `rec` of ECU `ecu`.
pub fn corpus_meta(ecu: usize, rec: usize) -> RecordMeta {
    let filepath = format!("traces/ecu{ecu}_rec{rec:03}.csv");
    RecordMeta {
        can_id: format!("0x{:03X}", 0x100 + 0x10 * ecu),
        channel_length_m: 0.5 + 0.25 * ecu as f64,
        channel_medium: ChannelMedium::TwistedPair,
        ecu_record_id: format!("ecu{ecu}-rec{rec:03}"),
        filepath,
        ecu_label: ecu,
    }
}
