//! Labeled feature tables, stratified splitting, confusion-matrix metrics,
//! and repeated randomized trials.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{self, MlpConfig, MlpModel};
use crate::seeds::derive_seed;

/// Feature matrix with one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Source record of each row, used for record-grouped splits.
    pub groups: Vec<String>,
    pub provenance: Option<String>,
}

impl LabeledDataset {
    pub fn new(
        x: Array2<f64>,
        y: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let groups = (0..y.len()).map(|i| format!("row{i}")).collect();
        Self::with_groups(x, y, feature_names, class_names, groups)
    }

    pub fn with_groups(
        x: Array2<f64>,
        y: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        groups: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != y.len() || groups.len() != y.len() {
            return Err(Error::Data(format!(
                "row count mismatch: {} feature rows, {} labels, {} groups",
                x.nrows(),
                y.len(),
                groups.len()
            )));
        }
        if x.ncols() != feature_names.len() {
            return Err(Error::Data(format!(
                "{} feature columns but {} names",
                x.ncols(),
                feature_names.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= class_names.len()) {
            return Err(Error::Data(format!(
                "label {bad} outside {} classes",
                class_names.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("feature matrix contains non-finite values".into()));
        }
        Ok(LabeledDataset {
            x,
            y,
            feature_names,
            class_names,
            groups,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            groups: rows.iter().map(|&i| self.groups[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Column subset in the given order.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<LabeledDataset> {
        let cols = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Config(format!("unknown feature column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledDataset {
            x: self.x.select(Axis(1), &cols),
            y: self.y.clone(),
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            class_names: self.class_names.clone(),
            groups: self.groups.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Mean feature row per group, keeping the first-seen group order.
    pub fn aggregate_by_group(&self) -> LabeledDataset {
        let mut order: Vec<&str> = Vec::new();
        let mut members: std::collections::HashMap<&str, Vec<usize>> = Default::default();
        for (i, g) in self.groups.iter().enumerate() {
            members
                .entry(g.as_str())
                .or_insert_with(|| {
                    order.push(g.as_str());
                    Vec::new()
                })
                .push(i);
        }
        let mut x = Array2::zeros((order.len(), self.x.ncols()));
        let mut y = Vec::with_capacity(order.len());
        for (r, g) in order.iter().enumerate() {
            let rows = &members[g];
            x.row_mut(r)
                .assign(&self.x.select(Axis(0), rows).mean_axis(Axis(0)).expect("non-empty"));
            y.push(self.y[rows[0]]);
        }
        LabeledDataset {
            x,
            y,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            groups: order.into_iter().map(String::from).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

fn rows_by_class(y: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        by_class[c].push(i);
    }
    by_class
}

fn train_count(n: usize, train_frac: f64) -> usize {
    ((train_frac * n as f64).round() as usize).clamp(1, n - 1)
}

fn check_frac(train_frac: f64) -> Result<()> {
    if train_frac > 0.0 && train_frac < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("train_frac must be in (0,1), got {train_frac}")))
    }
}

/// Stratified train/test row indices, each sorted ascending.
pub fn split_indices(
    dataset: &LabeledDataset,
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_frac(train_frac)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut rows) in rows_by_class(&dataset.y, dataset.n_classes())
        .into_iter()
        .enumerate()
    {
        match rows.len() {
            0 => continue,
            1 => {
                return Err(Error::Split(format!(
                    "class `{}` has a single sample",
                    dataset.class_names[c]
                )))
            }
            n => {
                rows.shuffle(&mut rng);
                let k = train_count(n, train_frac);
                train.extend_from_slice(&rows[..k]);
                test.extend_from_slice(&rows[k..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified split that keeps every group (record) on one side.
pub fn split_indices_grouped(
    dataset: &LabeledDataset,
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_frac(train_frac)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, rows) in rows_by_class(&dataset.y, dataset.n_classes())
        .into_iter()
        .enumerate()
    {
        if rows.is_empty() {
            continue;
        }
        let mut groups: Vec<&str> = Vec::new();
        for &r in &rows {
            let g = dataset.groups[r].as_str();
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
        if groups.len() < 2 {
            return Err(Error::Split(format!(
                "class `{}` has fewer than 2 records",
                dataset.class_names[c]
            )));
        }
        groups.shuffle(&mut rng);
        let k = train_count(groups.len(), train_frac);
        let train_groups = &groups[..k];
        for r in rows {
            if train_groups.contains(&dataset.groups[r].as_str()) {
                train.push(r);
            } else {
                test.push(r);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    dataset: &LabeledDataset,
    train_frac: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(dataset, train_frac, seed)?;
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}

/// Confusion matrix (rows = actual, columns = predicted) and derived metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    /// Row-normalized percentages; rows without support are all zero.
    pub confusion_pct: Vec<Vec<f64>>,
    /// Classes with no test samples.
    pub zero_support: Vec<usize>,
    pub accuracy: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub trials: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn from_confusion(class_names: Vec<String>, confusion: Vec<Vec<usize>>, trials: Vec<f64>) -> Self {
        let k = confusion.len();
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
        let predicted: Vec<usize> = (0..k).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();

        let confusion_pct = confusion
            .iter()
            .zip(&support)
            .map(|(row, &s)| {
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { 100.0 * c as f64 / s as f64 })
                    .collect()
            })
            .collect();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let per_class_precision = (0..k).map(|i| ratio(confusion[i][i], predicted[i])).collect();
        let per_class_recall = (0..k).map(|i| ratio(confusion[i][i], support[i])).collect();
        let zero_support: Vec<usize> = (0..k).filter(|&i| support[i] == 0).collect();

        let (mean, std) = mean_std(&trials);
        let mut notes = Vec::new();
        if trials.len() == 1 {
            notes.push("single trial: std reported as 0".to_string());
        }
        if !zero_support.is_empty() {
            notes.push(format!("classes without test support: {zero_support:?}"));
        }

        EvalReport {
            class_names,
            confusion,
            confusion_pct,
            zero_support,
            accuracy: ratio(correct, total),
            per_class_precision,
            per_class_recall,
            trials,
            mean,
            std,
            notes,
        }
    }
}

/// Mean and sample standard deviation (n - 1); std is 0 for fewer than 2 values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn confusion_matrix(actual: &[usize], predicted: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&a, &p) in actual.iter().zip(predicted) {
        m[a][p] += 1;
    }
    m
}

pub fn evaluate(model: &MlpModel, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    if model.feature_names != test.feature_names {
        return Err(Error::Input(format!(
            "model expects features {:?}, test set has {:?}",
            model.feature_names, test.feature_names
        )));
    }
    let predicted = model.predict_labels(test.x.view())?;
    let k = model.classes.len().max(test.n_classes());
    let confusion = confusion_matrix(&test.y, &predicted, k);
    let total = test.len();
    let correct = test.y.iter().zip(&predicted).filter(|(a, p)| a == p).count();
    let acc = correct as f64 / total as f64;
    Ok(EvalReport::from_confusion(test.class_names.clone(), confusion, vec![acc]))
}

/// Protocol for repeated train/test trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub mlp: MlpConfig,
    pub train_frac: f64,
    pub group_by_record: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            mlp: MlpConfig::default(),
            train_frac: 0.7,
            group_by_record: false,
        }
    }
}

/// Split, train and evaluate once; `seed` drives both the split and the model.
pub fn run_trial(dataset: &LabeledDataset, cfg: &TrialConfig, seed: u64) -> Result<EvalReport> {
    let split_seed = derive_seed(seed, 0);
    let (train_idx, test_idx) = if cfg.group_by_record {
        split_indices_grouped(dataset, cfg.train_frac, split_seed)?
    } else {
        split_indices(dataset, cfg.train_frac, split_seed)?
    };
    let train = dataset.select_rows(&train_idx);
    let test = dataset.select_rows(&test_idx);
    let mlp_cfg = MlpConfig {
        seed: derive_seed(seed, 1),
        ..cfg.mlp
    };
    let model = mlp::train(&train, &mlp_cfg)?;
    evaluate(&model, &test)
}

/// Seed of trial `t` under a master seed.
pub fn trial_seed(master: u64, t: usize) -> u64 {
    derive_seed(master, t as u64)
}

/// Independent trials with fresh splits; confusion counts are pooled and the
/// per-trial accuracies summarized by mean and sample std.
pub fn run_trials(
    dataset: &LabeledDataset,
    cfg: &TrialConfig,
    n_trials: usize,
    seed: u64,
) -> Result<EvalReport> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be >= 1".into()));
    }
    let reports = (0..n_trials)
        .into_par_iter()
        .map(|t| run_trial(dataset, cfg, trial_seed(seed, t)))
        .collect::<Result<Vec<_>>>()?;

    let k = reports[0].confusion.len();
    let mut pooled = vec![vec![0usize; k]; k];
    for r in &reports {
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                pooled[i][j] += c;
            }
        }
    }
    let trials = reports.iter().map(|r| r.accuracy).collect();
    Ok(EvalReport::from_confusion(dataset.class_names.clone(), pooled, trials))
}

/// On-disk evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config: serde_json::Value,
    pub feature_set: String,
    pub features: Vec<String>,
    pub classes: Vec<String>,
    pub trials: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub confusion_counts: Vec<Vec<usize>>,
    pub confusion_pct: Vec<Vec<f64>>,
    pub per_class: PerClass,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl ReportFile {
    pub fn new(report: &EvalReport, config: serde_json::Value, feature_set: &str, features: &[String]) -> Self {
        ReportFile {
            config,
            feature_set: feature_set.to_string(),
            features: features.to_vec(),
            classes: report.class_names.clone(),
            trials: report.trials.clone(),
            mean_accuracy: report.mean,
            std_accuracy: report.std,
            confusion_counts: report.confusion.clone(),
            confusion_pct: report.confusion_pct.clone(),
            per_class: PerClass {
                precision: report.per_class_precision.clone(),
                recall: report.per_class_recall.clone(),
            },
            notes: report.notes.clone(),
        }
    }
}
