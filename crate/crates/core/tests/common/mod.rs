#![allow(dead_code)]

use ecu_fingerprint::dataset::{
    class_name, synthesize_corpus, synthesize_with_edges, BitTiming, EcuProfile, GenerationConfig,
    RecordMeta, SignalTrace, SyntheticTrace,
};
use ecu_fingerprint::eval::LabeledDataset;
use ecu_fingerprint::features::{extract_table, Aggregation, ExtractConfig};
use ecu_fingerprint::preprocess::{Pulse, PulseConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub fn quiet_profile(zeta: f64, omega_n: f64) -> EcuProfile {
    EcuProfile {
        zeta,
        omega_n,
        v_rec: 2.5,
        v_dom: 3.5,
        noise_sigma: 0.0,
        jitter_sigma: 0.0,
    }
}

/// Long plateaus so slow profiles fully settle inside a bit.
pub fn long_bits(n_bits: usize) -> BitTiming {
    BitTiming {
        n_bits,
        bit_period: 1e-3,
        duty: 0.5,
        fs: 2e6,
    }
}

pub fn default_bits() -> BitTiming {
    GenerationConfig::default().timing()
}

pub fn synth(profile: &EcuProfile, timing: &BitTiming, seed: u64) -> SyntheticTrace {
    synthesize_with_edges(profile, timing, seed, RecordMeta::default()).unwrap()
}

pub const EXACT_EDGES: PulseConfig = PulseConfig {
    tail_margin: 0,
    fall_guard: 0,
};

/// First dominant pulse cut at the generator's own edge indices, optionally
/// shifted down by `offset` volts.
pub fn first_pulse(syn: &SyntheticTrace, offset: f64) -> Pulse {
    let samples: Vec<f64> = syn.trace.samples().iter().map(|v| v - offset).collect();
    Pulse::dominant(
        &samples,
        syn.trace.fs(),
        syn.rise_indices()[0],
        syn.fall_indices()[0],
        &EXACT_EDGES,
    )
}

pub fn trace_of(samples: Vec<f64>, fs: f64) -> SignalTrace {
    SignalTrace::new(samples, fs, RecordMeta::default()).unwrap()
}

/// Gaussian blobs on the vertices of a scaled simplex.
pub fn blobs(per_class: usize, classes: usize, dim: usize, spread: f64, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).unwrap();
    let n = per_class * classes;
    let mut x = Array2::zeros((n, dim));
    let mut y = Vec::with_capacity(n);
    for c in 0..classes {
        for i in 0..per_class {
            let r = c * per_class + i;
            for j in 0..dim {
                let centre = if j == c % dim { 4.0 } else { 0.0 } + if c >= dim { -4.0 } else { 0.0 };
                x[[r, j]] = centre + normal.sample(&mut rng);
            }
            y.push(c);
        }
    }
    LabeledDataset::new(
        x,
        y,
        (0..dim).map(|j| format!("f{j}")).collect(),
        (0..classes).map(|c| format!("c{c}")).collect(),
    )
    .unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Per-pulse feature table of the default synthetic corpus.
pub fn default_corpus_dataset(seed: u64) -> LabeledDataset {
    let cfg = GenerationConfig::default();
    let traces = synthesize_corpus(&cfg, seed).unwrap();
    let classes = (0..cfg.profiles.len()).map(class_name).collect();
    extract_table(&traces, classes, &ExtractConfig::default(), Aggregation::PerPulse)
        .to_dataset()
        .unwrap()
}

pub fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Largest relative error between analytic and central-difference gradients.
pub fn gradient_check(inputs: usize, hidden: usize, outputs: usize, batch: usize, seed: u64) -> f64 {
    use ecu_fingerprint::mlp::{loss_and_gradients, Params};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Params::init(inputs, hidden, outputs, &mut rng);
    let x = random_matrix(batch, inputs, &mut rng);
    let y: Vec<usize> = (0..batch).map(|_| rng.random_range(0..outputs)).collect();
    let (_, grads) = loss_and_gradients(&params, x.view(), &y);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, analytic) in grads.slices().into_iter().enumerate() {
        for i in 0..analytic.len() {
            let mut plus = params.clone();
            plus.slices_mut()[k][i] += h;
            let mut minus = params.clone();
            minus.slices_mut()[k][i] -= h;
            let numeric = (loss_and_gradients(&plus, x.view(), &y).0
                - loss_and_gradients(&minus, x.view(), &y).0)
                / (2.0 * h);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Shapes exercised by the gradient check, as (inputs, hidden, outputs, batch).
pub const GRADIENT_SHAPES: [(usize, usize, usize, usize); 10] = [
    (4, 5, 3, 8),
    (1, 1, 2, 1),
    (2, 3, 2, 4),
    (3, 8, 4, 5),
    (6, 2, 7, 10),
    (5, 10, 3, 3),
    (8, 4, 2, 16),
    (12, 6, 7, 7),
    (3, 16, 5, 2),
    (10, 7, 6, 12),
];

/// Runs the `ecufp` binary and returns (exit code, stdout, stderr).
pub fn ecufp(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_ecufp"))
        .args(args)
        .output()
        .expect("spawn ecufp");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Small run configuration that keeps every command under a few seconds.
pub fn write_tiny_config(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let cfg = serde_json::json!({
        "initial_mlp": {"hidden_units": 24, "epochs": 20},
        "tuned_mlp": {"hidden_units": 16, "epochs": 20},
        "n_trials": 2,
        "rank_trials": 1,
        "sweep": {"epochs": [10, 20], "hidden_units": [16]}
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

/// Generates and extracts a corpus with `records` records per ECU; returns
/// (config path, features path).
pub fn tiny_corpus(dir: &std::path::Path, records: usize) -> (String, String) {
    let config = write_tiny_config(dir).display().to_string();
    let data = dir.join("data").display().to_string();
    let n = records.to_string();
    let (code, _, err) = ecufp(&["generate", "--config", &config, "--out", &data, "--records-per-ecu", &n]);
    assert_eq!(code, 0, "{err}");
    let manifest = format!("{data}/manifest.json");
    let (code, _, err) = ecufp(&["extract", "--config", &config, "--out", &data, "--manifest", &manifest]);
    assert_eq!(code, 0, "{err}");
    (config, format!("{data}/features.jsonl"))
}
