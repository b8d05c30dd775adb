//! Spectral features of a pulse: Welch PSD, its bin-reduced shape, SNR against
//! the ideal step, and the mean and median frequencies (the spectral half of
//! feature set M2).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::{V_DOMINANT, V_RECESSIVE};
use crate::error::{Error, Result};
use crate::preprocess::{Pulse, PulseKind};

/// SNR reported when the measured pulse matches its ideal step exactly.
pub const SNR_CLAMP_DB: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    /// Subtract each segment's mean before windowing.
    #[default]
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchConfig {
    pub seg_len: usize,
    pub overlap: f64,
    pub detrend: Detrend,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig {
            seg_len: 256,
            overlap: 0.5,
            detrend: Detrend::Constant,
        }
    }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub fs: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    /// Frequency resolution.
    pub fn df(&self) -> f64 {
        match self.freqs.as_slice() {
            [a, b, ..] => b - a,
            _ => self.fs,
        }
    }

    /// Integrated power, `sum(psd) * df`.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.df()
    }
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch averaged periodogram with a Hann window and density scaling.
///
/// A segment longer than the signal is shortened to the whole signal.
pub fn welch_psd(samples: &[f64], fs: f64, cfg: &WelchConfig) -> Result<Spectrum> {
    if samples.len() < 2 {
        return Err(Error::Feature(format!(
            "welch needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::Config(format!("overlap must be in [0,1), got {}", cfg.overlap)));
    }
    if cfg.seg_len < 2 {
        return Err(Error::Config(format!("seg_len must be >= 2, got {}", cfg.seg_len)));
    }
    let seg = if cfg.seg_len > samples.len() {
        log::debug!(
            "welch segment {} exceeds signal length {}; using a single segment",
            cfg.seg_len,
            samples.len()
        );
        samples.len()
    } else {
        cfg.seg_len
    };
    let step = (seg - (cfg.overlap * seg as f64).floor() as usize).max(1);
    let n_segments = (samples.len() - seg) / step + 1;

    let window = hann(seg);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let n_out = seg / 2 + 1;
    let mut acc = vec![0.0; n_out];
    let mut buf = vec![Complex::new(0.0, 0.0); seg];

    for s in 0..n_segments {
        let chunk = &samples[s * step..s * step + seg];
        let offset = match cfg.detrend {
            Detrend::None => 0.0,
            Detrend::Constant => chunk.iter().sum::<f64>() / seg as f64,
        };
        for ((b, &x), &w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new((x - offset) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let scale = 1.0 / (fs * window_power * n_segments as f64);
    let nyquist_bin = (seg % 2 == 0).then_some(seg / 2);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs = (0..n_out).map(|k| k as f64 * fs / seg as f64).collect();
    Ok(Spectrum { freqs, psd, fs })
}

/// Equal-width bin reduction over `[0, fs/2]`, returning the mean density and
/// the number of spectral points in each bin.
pub fn bin_psd_with_counts(spec: &Spectrum, n_bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if n_bins == 0 || n_bins > spec.len() {
        return Err(Error::Config(format!(
            "bin count {n_bins} must be in 1..={}",
            spec.len()
        )));
    }
    let width = 0.5 * spec.fs / n_bins as f64;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&f, &p) in spec.freqs.iter().zip(&spec.psd) {
        let b = ((f / width).floor() as usize).min(n_bins - 1);
        sums[b] += p;
        counts[b] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    Ok((means, counts))
}

pub fn bin_psd(spec: &Spectrum, n_bins: usize) -> Result<Vec<f64>> {
    Ok(bin_psd_with_counts(spec, n_bins)?.0)
}

/// Low and high levels of the ideal bus waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealLevels {
    pub low: f64,
    pub high: f64,
}

impl Default for IdealLevels {
    fn default() -> Self {
        IdealLevels {
            low: V_RECESSIVE,
            high: V_DOMINANT,
        }
    }
}

/// The ideal step waveform aligned with the pulse's edges.
pub fn ideal_pulse(pulse: &Pulse, levels: IdealLevels) -> Vec<f64> {
    let (inside, outside) = match pulse.kind {
        PulseKind::Dominant => (levels.high, levels.low),
        PulseKind::Recessive => (levels.low, levels.high),
    };
    let close = pulse.width();
    (0..pulse.samples.len())
        .map(|i| if i < close { inside } else { outside })
        .collect()
}

/// `10 log10(sum PSD_ideal / sum PSD_noise)`, where noise is the measured pulse
/// minus its ideal step. Zero noise power yields [`SNR_CLAMP_DB`].
pub fn snr_db(pulse: &Pulse, levels: IdealLevels, welch: &WelchConfig) -> Result<f64> {
    if pulse.samples.is_empty() {
        return Err(Error::Feature("snr of an empty pulse".into()));
    }
    let ideal = ideal_pulse(pulse, levels);
    let noise: Vec<f64> = pulse.samples.iter().zip(&ideal).map(|(x, i)| x - i).collect();
    let signal_power: f64 = welch_psd(&ideal, pulse.fs, welch)?.psd.iter().sum();
    let noise_power: f64 = welch_psd(&noise, pulse.fs, welch)?.psd.iter().sum();
    if noise_power <= 0.0 {
        log::debug!("pulse matches its ideal step; clamping snr to {SNR_CLAMP_DB} dB");
        return Ok(SNR_CLAMP_DB);
    }
    if signal_power <= 0.0 {
        return Ok(-SNR_CLAMP_DB);
    }
    Ok((10.0 * (signal_power / noise_power).log10()).clamp(-SNR_CLAMP_DB, SNR_CLAMP_DB))
}

fn total(spec: &Spectrum) -> Result<f64> {
    let sum: f64 = spec.psd.iter().sum();
    if sum > 0.0 {
        Ok(sum)
    } else {
        Err(Error::Feature("spectrum carries no power".into()))
    }
}

/// Power-weighted mean frequency.
pub fn mean_frequency(spec: &Spectrum) -> Result<f64> {
    let sum = total(spec)?;
    let weighted: f64 = spec.freqs.iter().zip(&spec.psd).map(|(f, p)| f * p).sum();
    Ok(weighted / sum)
}

/// Frequency `f_m` at which the power up to and including `m` balances the
/// power from `m` onwards: minimizes `|sum_{j<=m} P_j - sum_{j>=m} P_j|`,
/// ties toward the lower frequency.
pub fn median_frequency(spec: &Spectrum) -> Result<f64> {
    let sum = total(spec)?;
    let mut below = 0.0;
    let mut best = (f64::INFINITY, 0);
    for (m, &p) in spec.psd.iter().enumerate() {
        let upto = below + p;
        // sum_{j>=m} = total - sum_{j<m}
        let imbalance = (upto - (sum - below)).abs();
        if imbalance < best.0 {
            best = (imbalance, m);
        }
        below = upto;
    }
    Ok(spec.freqs[best.1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    /// Welch settings for the shape features (bins, MNF, MDF).
    pub welch: WelchConfig,
    pub n_bins: usize,
    pub levels: IdealLevels,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            welch: WelchConfig::default(),
            n_bins: 16,
            levels: IdealLevels::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatures {
    pub psd_bins: Vec<f64>,
    pub psd_mean: f64,
    pub snr_db: f64,
    pub mnf: f64,
    pub mdf: f64,
}

pub fn extract_spectral_features(pulse: &Pulse, cfg: &SpectralConfig) -> Result<SpectralFeatures> {
    if !(4..=64).contains(&cfg.n_bins) {
        return Err(Error::Config(format!("n_bins must be in 4..=64, got {}", cfg.n_bins)));
    }
    let spec = welch_psd(&pulse.samples, pulse.fs, &cfg.welch)?;
    let n_bins = cfg.n_bins.min(spec.len());
    let mut psd_bins = bin_psd(&spec, n_bins)?;
    psd_bins.resize(cfg.n_bins, 0.0);
    let psd_mean = spec.psd.iter().sum::<f64>() / spec.len() as f64;
    // SNR compares absolute power, so the ideal step keeps its DC component.
    let snr_welch = WelchConfig {
        detrend: Detrend::None,
        ..cfg.welch
    };
    Ok(SpectralFeatures {
        psd_bins,
        psd_mean,
        snr_db: snr_db(pulse, cfg.levels, &snr_welch)?,
        mnf: mean_frequency(&spec)?,
        mdf: median_frequency(&spec)?,
    })
}
