//! Command-line front end. Every command writes deterministic JSON reports
//! into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_manifest, load_trace, store_trace, synthesize_corpus, GenerationConfig, Manifest,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, run_trials, EvalReport, LabeledDataset, ReportFile, TrialConfig};
use crate::features::{extract_table, parse_groups, Aggregation, Exclusion, ExtractConfig, FeatureGroup, FeatureTable};
use crate::mlp::{self, MlpConfig, MlpModel};
use crate::tuning::{
    bar_chart_svg, rank_and_select, rank_features, sweep_hyperparameters, Candidate, FeatureSetDef,
    RankResult, Score, StandardSet, SweepResult, DEFAULT_STOP_DELTA,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub epochs: Vec<usize>,
    pub hidden_units: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            epochs: vec![100, 500, 1000, 3000],
            hidden_units: vec![100, 275, 1000],
        }
    }
}

/// Everything a run depends on; loaded from `--config` and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub generation: GenerationConfig,
    pub extract: ExtractConfig,
    pub aggregation: Aggregation,
    /// Hyperparameters of the M1 and M2 baselines.
    pub initial_mlp: MlpConfig,
    /// Hyperparameters of M1opt, M2opt and custom sets, ranking and selection.
    pub tuned_mlp: MlpConfig,
    pub train_frac: f64,
    pub n_trials: usize,
    pub rank_trials: usize,
    pub group_by_record: bool,
    pub stop_delta: f64,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            features: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            generation: GenerationConfig::default(),
            extract: ExtractConfig::default(),
            aggregation: Aggregation::PerPulse,
            initial_mlp: MlpConfig {
                hidden_units: 1000,
                epochs: 3000,
                ..MlpConfig::default()
            },
            tuned_mlp: MlpConfig::default(),
            train_frac: 0.7,
            n_trials: 20,
            rank_trials: 5,
            group_by_record: false,
            stop_delta: DEFAULT_STOP_DELTA,
            sweep: SweepGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.initial_mlp.validate()?;
        self.tuned_mlp.validate()?;
        self.generation.timing().validate()?;
        for p in &self.generation.profiles {
            p.validate()?;
        }
        let e = &self.extract;
        if !(e.preprocess.edge.threshold > 0.0) || e.preprocess.edge.window == 0 {
            return Err(Error::Config("edge threshold must be > 0 and window >= 1".into()));
        }
        if !(e.preprocess.expected_period >= 0.0) {
            return Err(Error::Config("expected_period must be >= 0".into()));
        }
        if !(4..=64).contains(&e.spectral.n_bins) {
            return Err(Error::Config("n_bins must be in 4..=64".into()));
        }
        if e.spectral.welch.seg_len < 2 || !(0.0..1.0).contains(&e.spectral.welch.overlap) {
            return Err(Error::Config("seg_len must be >= 2 and overlap in [0, 1)".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config("train_frac must be in (0, 1)".into()));
        }
        if self.n_trials == 0 || self.rank_trials == 0 {
            return Err(Error::Config("trial counts must be >= 1".into()));
        }
        if !(self.stop_delta >= 0.0) {
            return Err(Error::Config("stop_delta must be >= 0".into()));
        }
        Ok(())
    }

    fn trial_config(&self, mlp: MlpConfig) -> TrialConfig {
        TrialConfig {
            mlp,
            train_frac: self.train_frac,
            group_by_record: self.group_by_record,
        }
    }

    fn mlp_for(&self, set: Option<StandardSet>) -> MlpConfig {
        match set {
            Some(s) if !s.is_tuned() => self.initial_mlp,
            _ => self.tuned_mlp,
        }
    }

    fn features_path(&self) -> Result<&Path> {
        self.features
            .as_deref()
            .ok_or_else(|| Error::Config("no features file given (use --features)".into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "ecufp", version, about = "CAN ECU fingerprinting from CAN-High voltage pulses")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct SetArgs {
    /// Standard feature set: M1, M2, M1opt or M2opt.
    #[arg(long, conflicts_with = "features_list")]
    pub set: Option<String>,
    /// Comma-separated custom feature list, e.g. "SSV,SNR,%OS".
    #[arg(long = "feature-list")]
    pub features_list: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    /// Keep all pulses of a record on the same side of the split.
    #[arg(long)]
    pub group_by_record: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic corpus and its manifest.
    Generate {
        #[arg(long)]
        records_per_ecu: Option<usize>,
    },
    /// Segment every trace in a manifest and write one feature row per pulse.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Average the pulses of each record into a single row.
        #[arg(long)]
        per_record: bool,
    },
    /// Train one model on a stratified split and save it.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
        #[command(flatten)]
        set: SetArgs,
    },
    /// Repeated randomized trials, or a saved model against a feature file.
    Evaluate {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Single-feature accuracy ranking.
    RankFeatures {
        #[arg(long)]
        features: Option<PathBuf>,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Ranking, cumulative selection and the epoch/hidden-unit sweep.
    Tune {
        #[arg(long)]
        features: Option<PathBuf>,
        /// Comma-separated epoch grid.
        #[arg(long, value_delimiter = ',')]
        epochs: Option<Vec<usize>>,
        /// Comma-separated hidden-unit grid.
        #[arg(long, value_delimiter = ',')]
        hidden_units: Option<Vec<usize>>,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Side-by-side comparison of feature sets.
    Report {
        #[arg(long)]
        features: Option<PathBuf>,
        /// Comma-separated standard sets to compare.
        #[arg(long, default_value = "M1,M2,M1opt,M2opt")]
        sets: String,
        /// Compare a single custom feature list instead.
        #[arg(long = "feature-list")]
        features_list: Option<String>,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
}

/// Resolve the configuration, run the command, return the files written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    apply_overrides(&mut cfg, &cli.command);
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    match &cli.command {
        Command::Generate { .. } => cmd_generate(&cfg),
        Command::Extract { .. } => cmd_extract(&cfg),
        Command::Train { set, .. } => cmd_train(&cfg, set),
        Command::Evaluate { model, set, .. } => cmd_evaluate(&cfg, model.as_deref(), set),
        Command::RankFeatures { .. } => cmd_rank(&cfg),
        Command::Tune { .. } => cmd_tune(&cfg),
        Command::Report { sets, features_list, .. } => cmd_report(&cfg, sets, features_list.as_deref()),
    }
}

fn apply_protocol(cfg: &mut RunConfig, p: &ProtocolArgs) {
    if let Some(t) = p.trials {
        cfg.n_trials = t;
        cfg.rank_trials = t;
    }
    if p.group_by_record {
        cfg.group_by_record = true;
    }
}

fn apply_overrides(cfg: &mut RunConfig, cmd: &Command) {
    let set_features = |cfg: &mut RunConfig, f: &Option<PathBuf>| {
        if let Some(f) = f {
            cfg.features = Some(f.clone());
        }
    };
    match cmd {
        Command::Generate { records_per_ecu } => {
            if let Some(n) = records_per_ecu {
                cfg.generation.records_per_ecu = *n;
            }
        }
        Command::Extract { manifest, per_record } => {
            if let Some(m) = manifest {
                cfg.manifest = Some(m.clone());
            }
            if *per_record {
                cfg.aggregation = Aggregation::RecordMean;
            }
        }
        Command::Train { features, .. } => set_features(cfg, features),
        Command::Evaluate { features, protocol, .. }
        | Command::RankFeatures { features, protocol }
        | Command::Report { features, protocol, .. } => {
            set_features(cfg, features);
            apply_protocol(cfg, protocol);
        }
        Command::Tune { features, epochs, hidden_units, protocol } => {
            set_features(cfg, features);
            apply_protocol(cfg, protocol);
            if let Some(e) = epochs {
                cfg.sweep.epochs = e.clone();
            }
            if let Some(u) = hidden_units {
                cfg.sweep.hidden_units = u.clone();
            }
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn config_value(cfg: &RunConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(cfg)?)
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.generation.records_per_ecu == 0 || cfg.generation.profiles.is_empty() {
        return Err(Error::Config("need at least one profile and one record per ECU".into()));
    }
    let traces = synthesize_corpus(&cfg.generation, cfg.seed)?;
    let trace_dir = cfg.out_dir.join("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;
    let mut written = Vec::with_capacity(traces.len() + 1);
    let mut records = Vec::with_capacity(traces.len());
    for t in &traces {
        let path = cfg.out_dir.join(&t.meta.filepath);
        store_trace(t, &path)?;
        records.push((PathBuf::from(&t.meta.filepath), t.meta.clone()));
        written.push(path);
    }
    let manifest = build_manifest(records)?;
    let path = cfg.out_dir.join("manifest.json");
    manifest.save(&path)?;
    written.push(path);
    Ok(written)
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let manifest_path = cfg
        .manifest
        .as_deref()
        .ok_or_else(|| Error::Config("no manifest given (use --manifest)".into()))?;
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut traces = Vec::new();
    let mut load_failures = Vec::new();
    for rec in &manifest.records {
        match load_trace(&base.join(&rec.path), cfg.generation.fs, rec.meta()) {
            Ok(t) => traces.push(t),
            Err(e) => {
                log::warn!("{}: {e}", rec.ecu_record_id);
                load_failures.push(Exclusion {
                    ecu_record_id: rec.ecu_record_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let mut table = extract_table(&traces, manifest.classes.clone(), &cfg.extract, cfg.aggregation);
    load_failures.append(&mut table.exclusions);
    table.exclusions = load_failures;
    let path = cfg.out_dir.join("features.jsonl");
    table.save(&path)?;
    Ok(vec![path])
}

struct ResolvedSet {
    name: String,
    standard: Option<StandardSet>,
    columns: Vec<String>,
}

fn resolve_set(args: &SetArgs, available: &[String], default: StandardSet) -> Result<ResolvedSet> {
    if let Some(list) = &args.features_list {
        let def = FeatureSetDef::custom(parse_groups(list)?);
        return Ok(ResolvedSet {
            name: def.name.clone(),
            standard: None,
            columns: def.columns(available),
        });
    }
    let standard = match &args.set {
        Some(s) => StandardSet::parse(s)
            .ok_or_else(|| Error::Config(format!("unknown feature set `{s}`; valid: M1, M2, M1opt, M2opt")))?,
        None => default,
    };
    Ok(ResolvedSet {
        name: standard.name().to_string(),
        standard: Some(standard),
        columns: FeatureSetDef::standard(standard).columns(available),
    })
}

fn load_dataset(cfg: &RunConfig) -> Result<LabeledDataset> {
    let path = cfg.features_path()?;
    let mut ds = FeatureTable::load(path)?.to_dataset()?;
    ds.provenance = Some(path.display().to_string());
    Ok(ds)
}

fn trials_report(
    cfg: &RunConfig,
    ds: &LabeledDataset,
    set: &ResolvedSet,
    n_trials: usize,
) -> Result<(EvalReport, MlpConfig)> {
    let mlp = cfg.mlp_for(set.standard);
    let sub = ds.select_features(&set.columns)?;
    Ok((run_trials(&sub, &cfg.trial_config(mlp), n_trials, cfg.seed)?, mlp))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    config: serde_json::Value,
    feature_set: &'a str,
    features: &'a [String],
    dropped_features: &'a [String],
    train_rows: usize,
    test_rows: usize,
    final_loss: f64,
    test_accuracy: f64,
}

pub fn cmd_train(cfg: &RunConfig, set: &SetArgs) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?;
    let resolved = resolve_set(set, &ds.feature_names, StandardSet::M2opt)?;
    let sub = ds.select_features(&resolved.columns)?;
    let (train_idx, test_idx) = crate::eval::split_indices(&sub, cfg.train_frac, cfg.seed)?;
    let train = sub.select_rows(&train_idx);
    let test = sub.select_rows(&test_idx);
    let mlp_cfg = MlpConfig {
        seed: cfg.seed,
        ..cfg.mlp_for(resolved.standard)
    };
    let trained = mlp::train_with_history(&train, &mlp_cfg)?;
    let report = evaluate(&trained.model, &test)?;
    let model_path = cfg.out_dir.join("model.json");
    trained.model.save(&model_path)?;
    let summary = TrainSummary {
        config: config_value(cfg)?,
        feature_set: &resolved.name,
        features: &resolved.columns,
        dropped_features: &trained.model.scaler.dropped,
        train_rows: train.len(),
        test_rows: test.len(),
        final_loss: trained.loss_curve.last().copied().unwrap_or(f64::NAN),
        test_accuracy: report.accuracy,
    };
    let summary_path = write_json(&cfg.out_dir.join("train_report.json"), &summary)?;
    Ok(vec![model_path, summary_path])
}

pub fn cmd_evaluate(cfg: &RunConfig, model: Option<&Path>, set: &SetArgs) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?;
    let path = cfg.out_dir.join("eval_report.json");
    if let Some(model_path) = model {
        let model = MlpModel::load(model_path)?;
        let sub = ds.select_features(&model.feature_names)?;
        let report = evaluate(&model, &sub)?;
        let file = ReportFile::new(&report, config_value(cfg)?, "model", &model.feature_names);
        return Ok(vec![write_json(&path, &file)?]);
    }
    let resolved = resolve_set(set, &ds.feature_names, StandardSet::M2opt)?;
    let (report, _) = trials_report(cfg, &ds, &resolved, cfg.n_trials)?;
    let file = ReportFile::new(&report, config_value(cfg)?, &resolved.name, &resolved.columns);
    Ok(vec![write_json(&path, &file)?])
}

fn rank_candidates(ds: &LabeledDataset) -> Vec<Candidate> {
    let mut groups = StandardSet::M2.groups();
    groups.insert(8, FeatureGroup::PsdMean);
    groups
        .into_iter()
        .map(|g| Candidate::from_group(g, &ds.feature_names))
        .collect()
}

fn bars(scores: &[Score]) -> Vec<(String, f64)> {
    scores.iter().map(|s| (s.name.clone(), s.mean)).collect()
}

#[derive(Serialize)]
struct RankFile<'a> {
    config: serde_json::Value,
    per_feature: &'a [Score],
}

pub fn cmd_rank(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?;
    let scores = rank_features(
        &ds,
        &rank_candidates(&ds),
        &cfg.trial_config(cfg.tuned_mlp),
        cfg.rank_trials,
        cfg.seed,
    )?;
    let json = write_json(
        &cfg.out_dir.join("rank_report.json"),
        &RankFile {
            config: config_value(cfg)?,
            per_feature: &scores,
        },
    )?;
    let svg = write_text(
        &cfg.out_dir.join("rank_features.svg"),
        &bar_chart_svg("Single-feature accuracy", &bars(&scores)),
    )?;
    Ok(vec![json, svg])
}

#[derive(Serialize)]
struct TuneFile<'a> {
    config: serde_json::Value,
    #[serde(flatten)]
    rank: &'a RankResult,
    sweep: &'a SweepResult,
}

pub fn cmd_tune(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?;
    let candidates = rank_candidates(&ds);
    let trial_cfg = cfg.trial_config(cfg.tuned_mlp);
    let rank = rank_and_select(&ds, &candidates, &trial_cfg, cfg.rank_trials, cfg.seed, cfg.stop_delta)?;
    let selected: Vec<String> = rank
        .selected
        .iter()
        .flat_map(|name| {
            candidates
                .iter()
                .find(|c| &c.name == name)
                .map(|c| c.columns.clone())
                .unwrap_or_default()
        })
        .collect();
    let sweep = sweep_hyperparameters(
        &ds,
        &selected,
        &cfg.sweep.epochs,
        &cfg.sweep.hidden_units,
        &trial_cfg,
        cfg.rank_trials,
        cfg.seed,
    )?;
    let json = write_json(
        &cfg.out_dir.join("tune_report.json"),
        &TuneFile {
            config: config_value(cfg)?,
            rank: &rank,
            sweep: &sweep,
        },
    )?;
    let svg = write_text(
        &cfg.out_dir.join("rank_features.svg"),
        &bar_chart_svg("Single-feature accuracy", &bars(&rank.per_feature)),
    )?;
    Ok(vec![json, svg])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub features: Vec<String>,
    pub hidden_units: usize,
    pub epochs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Percent accuracy as "mean:std".
    pub summary: String,
}

#[derive(Serialize)]
struct ComparisonFile<'a> {
    config: serde_json::Value,
    methods: &'a [MethodRow],
}

pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{:.2}:{:.2}", 100.0 * mean, 100.0 * std)
}

pub fn cmd_report(cfg: &RunConfig, sets: &str, features_list: Option<&str>) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?;
    let mut resolved = Vec::new();
    if let Some(list) = features_list {
        let args = SetArgs {
            set: None,
            features_list: Some(list.to_string()),
        };
        resolved.push(resolve_set(&args, &ds.feature_names, StandardSet::M2opt)?);
    } else {
        for name in sets.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let args = SetArgs {
                set: Some(name.to_string()),
                features_list: None,
            };
            resolved.push(resolve_set(&args, &ds.feature_names, StandardSet::M2opt)?);
        }
    }
    if resolved.is_empty() {
        return Err(Error::Config("no feature sets to compare".into()));
    }
    let mut rows = Vec::with_capacity(resolved.len());
    for set in &resolved {
        let (report, mlp) = trials_report(cfg, &ds, set, cfg.n_trials)?;
        rows.push(MethodRow {
            method: set.name.clone(),
            features: set.columns.clone(),
            hidden_units: mlp.hidden_units,
            epochs: mlp.epochs,
            mean_accuracy: report.mean,
            std_accuracy: report.std,
            summary: format_mean_std(report.mean, report.std),
        });
    }
    let json = write_json(
        &cfg.out_dir.join("report.json"),
        &ComparisonFile {
            config: config_value(cfg)?,
            methods: &rows,
        },
    )?;
    let mut table = String::from("| method | units | epochs | accuracy (mean:std %) |\n|---|---|---|---|\n");
    for r in &rows {
        table.push_str(&format!("| {} | {} | {} | {} |\n", r.method, r.hidden_units, r.epochs, r.summary));
    }
    let md = write_text(&cfg.out_dir.join("report.md"), &table)?;
    let chart: Vec<(String, f64)> = rows.iter().map(|r| (r.method.clone(), r.mean_accuracy)).collect();
    let svg = write_text(
        &cfg.out_dir.join("report.svg"),
        &bar_chart_svg("Comparison of methods", &chart),
    )?;
    Ok(vec![json, md, svg])
}

/// Single-line machine-readable error.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.initial_mlp.hidden_units, 1000);
        assert_eq!(cfg.tuned_mlp.hidden_units, 275);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 9, "tuned_mlp": {"epochs": 50}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.tuned_mlp.epochs, 50);
        assert_eq!(cfg.tuned_mlp.hidden_units, 275);
    }

    #[test]
    fn invalid_ranges_rejected() {
        let mut cfg = RunConfig::default();
        cfg.train_frac = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.extract.spectral.n_bins = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mean_std_formatting() {
        assert_eq!(format_mean_std(0.98283, 0.0045), "98.28:0.45");
    }

    #[test]
    fn error_line_is_single_line_json() {
        let line = error_json("config", "bad\nthing");
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"]["kind"], "config");
    }
}
