//! Feature ranking, greedy cumulative selection and the epoch/hidden-unit sweep.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{run_trials, LabeledDataset, TrialConfig};
use crate::features::{group_columns, m2_groups, FeatureGroup, M1_GROUPS, REDUCED_GROUPS};
use crate::mlp::MlpConfig;

/// Named standard feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StandardSet {
    M1,
    M2,
    M1opt,
    M2opt,
}

impl StandardSet {
    pub const ALL: [StandardSet; 4] = [StandardSet::M1, StandardSet::M2, StandardSet::M1opt, StandardSet::M2opt];

    pub fn name(self) -> &'static str {
        match self {
            StandardSet::M1 => "M1",
            StandardSet::M2 => "M2",
            StandardSet::M1opt => "M1opt",
            StandardSet::M2opt => "M2opt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }

    pub fn groups(self) -> Vec<FeatureGroup> {
        match self {
            StandardSet::M1 | StandardSet::M1opt => M1_GROUPS.to_vec(),
            StandardSet::M2 => m2_groups(),
            StandardSet::M2opt => REDUCED_GROUPS.to_vec(),
        }
    }

    /// The "opt" sets use the tuned hyperparameters, the others the initial ones.
    pub fn is_tuned(self) -> bool {
        matches!(self, StandardSet::M1opt | StandardSet::M2opt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetDef {
    pub name: String,
    pub groups: Vec<FeatureGroup>,
}

impl FeatureSetDef {
    pub fn standard(set: StandardSet) -> Self {
        FeatureSetDef {
            name: set.name().to_string(),
            groups: set.groups(),
        }
    }

    pub fn custom(groups: Vec<FeatureGroup>) -> Self {
        FeatureSetDef {
            name: "custom".into(),
            groups,
        }
    }

    pub fn columns(&self, available: &[String]) -> Vec<String> {
        group_columns(&self.groups, available)
    }
}

/// A unit of ranking: one name standing for one or more columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub name: String,
    pub columns: Vec<String>,
}

impl Candidate {
    pub fn from_group(g: FeatureGroup, available: &[String]) -> Self {
        Candidate {
            name: g.label().to_string(),
            columns: g.columns(available),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixScore {
    pub features: Vec<String>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    /// Scores in ranked order.
    pub per_feature: Vec<Score>,
    pub order: Vec<String>,
    pub cumulative: Vec<PrefixScore>,
    pub selected: Vec<String>,
}

/// Ranking order: descending mean, ties by name.
pub fn rank_order(scores: &[Score]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .mean
            .total_cmp(&scores[a].mean)
            .then_with(|| scores[a].name.cmp(&scores[b].name))
    });
    idx
}

fn columns_of<'a>(cands: impl IntoIterator<Item = &'a Candidate>) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for c in cands {
        for col in &c.columns {
            if !cols.contains(col) {
                cols.push(col.clone());
            }
        }
    }
    cols
}

/// Train single-feature models for every candidate and sort by mean accuracy.
/// Every candidate sees the same trial seeds, hence the same splits.
pub fn rank_features(
    dataset: &LabeledDataset,
    candidates: &[Candidate],
    cfg: &TrialConfig,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<Score>> {
    if candidates.is_empty() {
        return Err(Error::Config("no features to rank".into()));
    }
    let scores = candidates
        .iter()
        .map(|c| {
            let sub = dataset.select_features(&c.columns)?;
            let r = run_trials(&sub, cfg, n_trials, seed)?;
            Ok(Score {
                name: c.name.clone(),
                mean: r.mean,
                std: r.std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_order(&scores).into_iter().map(|i| scores[i].clone()).collect())
}

/// Outcome of a prefix scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// (mean, std) per evaluated prefix length 1..=k.
    pub curve: Vec<(f64, f64)>,
    /// Length of the best prefix (shortest among equals).
    pub best_len: usize,
}

/// Evaluate prefixes of length 1, 2, ... up to `n`, stopping once the gain
/// over the previous prefix has been below `stop_delta` twice in a row.
pub fn cumulative_scan<F>(n: usize, stop_delta: f64, mut evaluate: F) -> Result<Selection>
where
    F: FnMut(usize) -> Result<(f64, f64)>,
{
    if n == 0 {
        return Err(Error::Config("ranked order is empty".into()));
    }
    let mut curve: Vec<(f64, f64)> = Vec::new();
    let mut flat_steps = 0;
    for len in 1..=n {
        let score = evaluate(len)?;
        if let Some(&(prev, _)) = curve.last() {
            if score.0 - prev < stop_delta {
                flat_steps += 1;
            } else {
                flat_steps = 0;
            }
        }
        curve.push(score);
        if flat_steps >= 2 {
            break;
        }
    }
    let mut best_len = 1;
    for (i, &(m, _)) in curve.iter().enumerate() {
        if m > curve[best_len - 1].0 {
            best_len = i + 1;
        }
    }
    Ok(Selection { curve, best_len })
}

pub const DEFAULT_STOP_DELTA: f64 = 0.002;

/// Greedy cumulative addition over a ranked candidate order.
pub fn cumulative_selection(
    dataset: &LabeledDataset,
    ranked: &[Candidate],
    cfg: &TrialConfig,
    n_trials: usize,
    seed: u64,
    stop_delta: f64,
) -> Result<(Vec<PrefixScore>, Vec<String>)> {
    let sel = cumulative_scan(ranked.len(), stop_delta, |len| {
        let sub = dataset.select_features(&columns_of(&ranked[..len]))?;
        let r = run_trials(&sub, cfg, n_trials, seed)?;
        Ok((r.mean, r.std))
    })?;
    let cumulative = sel
        .curve
        .iter()
        .enumerate()
        .map(|(i, &(mean, std))| PrefixScore {
            features: ranked[..=i].iter().map(|c| c.name.clone()).collect(),
            mean,
            std,
        })
        .collect();
    let selected = ranked[..sel.best_len].iter().map(|c| c.name.clone()).collect();
    Ok((cumulative, selected))
}

/// Ranking followed by cumulative selection.
pub fn rank_and_select(
    dataset: &LabeledDataset,
    candidates: &[Candidate],
    cfg: &TrialConfig,
    n_trials: usize,
    seed: u64,
    stop_delta: f64,
) -> Result<RankResult> {
    let per_feature = rank_features(dataset, candidates, cfg, n_trials, seed)?;
    let ranked: Vec<Candidate> = per_feature
        .iter()
        .map(|s| {
            candidates
                .iter()
                .find(|c| c.name == s.name)
                .expect("score names come from candidates")
                .clone()
        })
        .collect();
    let (cumulative, selected) = cumulative_selection(dataset, &ranked, cfg, n_trials, seed, stop_delta)?;
    Ok(RankResult {
        order: per_feature.iter().map(|s| s.name.clone()).collect(),
        per_feature,
        cumulative,
        selected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epochs: usize,
    pub hidden_units: usize,
    pub mean: f64,
    pub std: f64,
    pub trials: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub features: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the best cell.
    pub best: usize,
}

impl SweepResult {
    pub fn cell(&self, epochs: usize, hidden_units: usize) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.epochs == epochs && r.hidden_units == hidden_units)
    }
}

fn unique_sorted(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Cartesian sweep over epochs × hidden units. Rows are ordered by
/// (epochs, units) ascending; the argmax prefers the earliest row on ties.
pub fn sweep_hyperparameters(
    dataset: &LabeledDataset,
    columns: &[String],
    epochs: &[usize],
    hidden_units: &[usize],
    cfg: &TrialConfig,
    n_trials: usize,
    seed: u64,
) -> Result<SweepResult> {
    let epochs = unique_sorted(epochs);
    let units = unique_sorted(hidden_units);
    if epochs.is_empty() || units.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let sub = dataset.select_features(columns)?;
    let cells: Vec<(usize, usize)> = epochs
        .iter()
        .flat_map(|&e| units.iter().map(move |&u| (e, u)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(e, u)| {
            let trial_cfg = TrialConfig {
                mlp: MlpConfig {
                    epochs: e,
                    hidden_units: u,
                    ..cfg.mlp
                },
                ..*cfg
            };
            let r = run_trials(&sub, &trial_cfg, n_trials, seed)?;
            Ok(SweepRow {
                epochs: e,
                hidden_units: u,
                mean: r.mean,
                std: r.std,
                trials: r.trials,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean > rows[best].mean {
            best = i;
        }
    }
    Ok(SweepResult {
        features: columns.to_vec(),
        rows,
        best,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Vertical bar chart of accuracies, one bar per entry.
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)]) -> String {
    let (bar_w, gap, left, top, plot_h) = (40.0, 14.0, 50.0, 40.0, 300.0);
    let width = left + bars.len() as f64 * (bar_w + gap) + gap;
    let height = top + plot_h + 70.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title));
    let base = top + plot_h;
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{base}" x2="{width}" y2="{base}" stroke="black"/>"#);
    for tick in 0..=4 {
        let v = tick as f64 * 0.25;
        let y = base - v * plot_h;
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">{v:.2}</text>"#, left - 4.0);
    }
    for (i, (label, acc)) in bars.iter().enumerate() {
        let x = left + gap + i as f64 * (bar_w + gap);
        let h = acc.clamp(0.0, 1.0) * plot_h;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{:.1}" width="{bar_w}" height="{h:.1}" fill="#4878a8"/>"##,
            base - h
        );
        let cx = x + bar_w / 2.0;
        let _ = writeln!(s, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{:.1}</text>"#, base - h - 3.0, acc * 100.0);
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-45 {cx:.1} {:.1})">{}</text>"#,
            base + 14.0,
            base + 14.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}
