//! Per-pulse feature rows, named feature groups and the standard feature sets.

use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SignalTrace;
use crate::error::{Error, Result};
use crate::eval::LabeledDataset;
use crate::features_spectral::{extract_spectral_features, SpectralConfig};
use crate::features_time::{extract_time_features, TimeFeatureConfig};
use crate::preprocess::{dominant_pulses, segment, PreprocessConfig, Pulse};

/// Columns in row order for a given bin count.
pub fn column_names(n_bins: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t_peak", "ssv", "sse", "pct_os", "t_settle", "t_rise", "t_delay"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..n_bins).map(psd_bin_name));
    cols.extend(["psd_mean", "snr_db", "mnf", "mdf"].iter().map(|s| s.to_string()));
    cols
}

pub fn psd_bin_name(i: usize) -> String {
    format!("psd_bin_{i:02}")
}

/// A rankable feature: one column, or all PSD bins together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "T_p")]
    PeakTime,
    #[serde(rename = "SSV")]
    Ssv,
    #[serde(rename = "SSE")]
    Sse,
    #[serde(rename = "%OS")]
    Overshoot,
    #[serde(rename = "T_settle")]
    Settle,
    #[serde(rename = "T_rise")]
    Rise,
    #[serde(rename = "T_delay")]
    Delay,
    #[serde(rename = "SD")]
    PsdBins,
    #[serde(rename = "SD_mean")]
    PsdMean,
    #[serde(rename = "SNR")]
    Snr,
    #[serde(rename = "MNF")]
    Mnf,
    #[serde(rename = "MDF")]
    Mdf,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 12] = [
        FeatureGroup::PeakTime,
        FeatureGroup::Ssv,
        FeatureGroup::Sse,
        FeatureGroup::Overshoot,
        FeatureGroup::Settle,
        FeatureGroup::Rise,
        FeatureGroup::Delay,
        FeatureGroup::PsdBins,
        FeatureGroup::PsdMean,
        FeatureGroup::Snr,
        FeatureGroup::Mnf,
        FeatureGroup::Mdf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FeatureGroup::PeakTime => "T_p",
            FeatureGroup::Ssv => "SSV",
            FeatureGroup::Sse => "SSE",
            FeatureGroup::Overshoot => "%OS",
            FeatureGroup::Settle => "T_settle",
            FeatureGroup::Rise => "T_rise",
            FeatureGroup::Delay => "T_delay",
            FeatureGroup::PsdBins => "SD",
            FeatureGroup::PsdMean => "SD_mean",
            FeatureGroup::Snr => "SNR",
            FeatureGroup::Mnf => "MNF",
            FeatureGroup::Mdf => "MDF",
        }
    }

    /// Accepts the group label or its column name.
    pub fn parse(name: &str) -> Option<FeatureGroup> {
        FeatureGroup::ALL.into_iter().find(|g| {
            g.label().eq_ignore_ascii_case(name)
                || match g {
                    FeatureGroup::PsdBins => name == "psd_bins",
                    g => g.single_column() == Some(name),
                }
        })
    }

    fn single_column(self) -> Option<&'static str> {
        Some(match self {
            FeatureGroup::PeakTime => "t_peak",
            FeatureGroup::Ssv => "ssv",
            FeatureGroup::Sse => "sse",
            FeatureGroup::Overshoot => "pct_os",
            FeatureGroup::Settle => "t_settle",
            FeatureGroup::Rise => "t_rise",
            FeatureGroup::Delay => "t_delay",
            FeatureGroup::PsdBins => return None,
            FeatureGroup::PsdMean => "psd_mean",
            FeatureGroup::Snr => "snr_db",
            FeatureGroup::Mnf => "mnf",
            FeatureGroup::Mdf => "mdf",
        })
    }

    /// Columns of this group present in `available`.
    pub fn columns(self, available: &[String]) -> Vec<String> {
        match self.single_column() {
            Some(c) => vec![c.to_string()],
            None => available
                .iter()
                .filter(|c| c.starts_with("psd_bin_"))
                .cloned()
                .collect(),
        }
    }
}

pub const M1_GROUPS: [FeatureGroup; 7] = [
    FeatureGroup::PeakTime,
    FeatureGroup::Ssv,
    FeatureGroup::Sse,
    FeatureGroup::Overshoot,
    FeatureGroup::Settle,
    FeatureGroup::Rise,
    FeatureGroup::Delay,
];

pub const SPECTRAL_GROUPS: [FeatureGroup; 4] = [
    FeatureGroup::PsdBins,
    FeatureGroup::Snr,
    FeatureGroup::Mnf,
    FeatureGroup::Mdf,
];

pub const REDUCED_GROUPS: [FeatureGroup; 5] = [
    FeatureGroup::Snr,
    FeatureGroup::Ssv,
    FeatureGroup::Sse,
    FeatureGroup::Mnf,
    FeatureGroup::Overshoot,
];

pub fn m2_groups() -> Vec<FeatureGroup> {
    M1_GROUPS.iter().chain(&SPECTRAL_GROUPS).copied().collect()
}

/// Expand groups to column names, preserving order.
pub fn group_columns(groups: &[FeatureGroup], available: &[String]) -> Vec<String> {
    groups.iter().flat_map(|g| g.columns(available)).collect()
}

/// Parse a comma-separated list of group labels or column names.
pub fn parse_groups(list: &str) -> Result<Vec<FeatureGroup>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let g = FeatureGroup::parse(name).ok_or_else(|| {
            let valid: Vec<&str> = FeatureGroup::ALL.iter().map(|g| g.label()).collect();
            Error::Config(format!("unknown feature `{name}`; valid names: {}", valid.join(", ")))
        })?;
        if !out.contains(&g) {
            out.push(g);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty feature list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub preprocess: PreprocessConfig,
    pub time: TimeFeatureConfig,
    pub spectral: SpectralConfig,
}

/// Feature values of one pulse, in `column_names` order.
pub fn pulse_features(pulse: &Pulse, cfg: &ExtractConfig) -> Result<Vec<f64>> {
    let t = extract_time_features(pulse, &cfg.time)?;
    let s = extract_spectral_features(pulse, &cfg.spectral)?;
    let mut row = vec![t.t_peak, t.ssv, t.sse, t.pct_os, t.t_settle, t.t_rise, t.t_delay];
    row.extend_from_slice(&s.psd_bins);
    row.extend_from_slice(&[s.psd_mean, s.snr_db, s.mnf, s.mdf]);
    if let Some(i) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::Feature(format!("non-finite feature in column {i}")));
    }
    Ok(row)
}

/// Rows for every dominant pulse of a trace; pulses whose features cannot be
/// computed are skipped. Returns the rows and the number skipped.
pub fn trace_features(trace: &SignalTrace, cfg: &ExtractConfig) -> Result<(Vec<Vec<f64>>, usize)> {
    let pulses = dominant_pulses(segment(trace, &cfg.preprocess)?);
    let mut rows = Vec::with_capacity(pulses.len());
    let mut skipped = 0;
    for p in &pulses {
        match pulse_features(p, cfg) {
            Ok(r) => rows.push(r),
            Err(e) => {
                skipped += 1;
                warn!("{}: pulse at {} skipped: {e}", trace.meta.ecu_record_id, p.i_rise);
            }
        }
    }
    Ok((rows, skipped))
}

/// One line of the feature store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub ecu_record_id: String,
    pub ecu_label: usize,
    pub can_id: String,
    /// Pulse ordinal within the record; absent for record-mean rows.
    pub pulse: Option<usize>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub ecu_record_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub classes: Vec<String>,
    pub rows: Vec<FeatureRow>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    PerPulse,
    RecordMean,
}

/// Extract rows for many traces in parallel; output order follows input order.
pub fn extract_table(
    traces: &[SignalTrace],
    classes: Vec<String>,
    cfg: &ExtractConfig,
    aggregation: Aggregation,
) -> FeatureTable {
    let results: Vec<_> = traces.par_iter().map(|t| trace_features(t, cfg)).collect();
    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    for (trace, res) in traces.iter().zip(results) {
        let meta = &trace.meta;
        let feats = match res {
            Ok((f, _)) if !f.is_empty() => f,
            Ok(_) => {
                warn!("{}: no valid pulses", meta.ecu_record_id);
                exclusions.push(Exclusion {
                    ecu_record_id: meta.ecu_record_id.clone(),
                    reason: "no valid pulses".into(),
                });
                continue;
            }
            Err(e) => {
                warn!("{}: {e}", meta.ecu_record_id);
                exclusions.push(Exclusion {
                    ecu_record_id: meta.ecu_record_id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let row = |pulse, features| FeatureRow {
            ecu_record_id: meta.ecu_record_id.clone(),
            ecu_label: meta.ecu_label,
            can_id: meta.can_id.clone(),
            pulse,
            features,
        };
        match aggregation {
            Aggregation::PerPulse => {
                rows.extend(feats.into_iter().enumerate().map(|(i, f)| row(Some(i), f)))
            }
            Aggregation::RecordMean => {
                let n = feats.len() as f64;
                let mut mean = vec![0.0; feats[0].len()];
                for f in &feats {
                    for (m, v) in mean.iter_mut().zip(f) {
                        *m += v / n;
                    }
                }
                rows.push(row(None, mean));
            }
        }
    }
    FeatureTable {
        columns: column_names(cfg.spectral.n_bins),
        classes,
        rows,
        exclusions,
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    columns: Vec<String>,
    classes: Vec<String>,
    exclusions: Vec<Exclusion>,
}

impl FeatureTable {
    /// JSON lines: a header object, then one object per row.
    pub fn write_jsonl(&self, out: &mut impl Write) -> Result<()> {
        let header = Header {
            columns: self.columns.clone(),
            classes: self.classes.clone(),
            exclusions: self.exclusions.clone(),
        };
        let io = |e| Error::Io {
            path: "<features>".into(),
            source: e,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?).map_err(io)?;
        for r in &self.rows {
            writeln!(out, "{}", serde_json::to_string(r)?).map_err(io)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(file).lines().enumerate();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line as u64,
            msg,
        };
        let header: Header = match lines.next() {
            Some((_, l)) => serde_json::from_str(&l.map_err(|e| Error::io(path, e))?)
                .map_err(|e| parse_err(1, e.to_string()))?,
            None => return Err(parse_err(1, "empty feature file".into())),
        };
        let mut rows = Vec::new();
        for (i, l) in lines {
            let l = l.map_err(|e| Error::io(path, e))?;
            if l.trim().is_empty() {
                continue;
            }
            let row: FeatureRow =
                serde_json::from_str(&l).map_err(|e| parse_err(i + 1, e.to_string()))?;
            if row.features.len() != header.columns.len() || row.ecu_label >= header.classes.len() {
                return Err(parse_err(i + 1, "row does not match header".into()));
            }
            rows.push(row);
        }
        Ok(FeatureTable {
            columns: header.columns,
            classes: header.classes,
            rows,
            exclusions: header.exclusions,
        })
    }

    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        let d = self.columns.len();
        let mut x = Array2::zeros((self.rows.len(), d));
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r.features.iter().enumerate() {
                x[[i, j]] = *v;
            }
        }
        LabeledDataset::with_groups(
            x,
            self.rows.iter().map(|r| r.ecu_label).collect(),
            self.columns.clone(),
            self.classes.clone(),
            self.rows.iter().map(|r| r.ecu_record_id.clone()).collect(),
        )
    }
}
