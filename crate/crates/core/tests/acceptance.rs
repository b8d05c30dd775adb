//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use ecu_fingerprint::dataset::default_profiles;
use ecu_fingerprint::eval::{run_trials, LabeledDataset, TrialConfig};
use ecu_fingerprint::features_spectral::{
    mean_frequency, median_frequency, snr_db, welch_psd, Detrend, IdealLevels, Spectrum, WelchConfig,
};
use ecu_fingerprint::features_time::{extract_time_features, TimeFeatureConfig};
use ecu_fingerprint::mlp::{train, MlpConfig};
use ecu_fingerprint::preprocess::{
    dominant_pulses, reject_out_of_bound, segment, EdgeSet, Pulse, PreprocessConfig, PulseConfig,
};
use ecu_fingerprint::tuning::{sweep_hyperparameters, FeatureSetDef, StandardSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gradient_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for (s, &(i, h, o, b)) in GRADIENT_SHAPES.iter().enumerate() {
        worst = worst.max(gradient_check(i, h, o, b, 1000 + s as u64));
    }
    ensure(
        worst < 1e-5,
        format!("{} shapes, max relative error {worst:.2e}", GRADIENT_SHAPES.len()),
    )
}

fn learner_sanity() -> Check {
    let ds = blobs(100, 3, 2, 1.0, 2024);
    let model = train(&ds, &MlpConfig::default()).map_err(|e| e.to_string())?;
    let acc = accuracy(&model.predict_labels(ds.x.view()).map_err(|e| e.to_string())?, &ds.y);
    ensure(acc >= 0.99, format!("3-class blobs, 275 units / 500 epochs: training accuracy {acc:.4}"))
}

fn feature_oracle() -> Check {
    let cfg = TimeFeatureConfig::default();
    let omega_n = TWO_PI * 1e4;
    let mut lines = Vec::new();
    let mut ok = true;
    for zeta in [0.3, 0.4, 0.5, 0.6, 0.8] {
        let profile = quiet_profile(zeta, omega_n);
        let syn = synth(&profile, &long_bits(2), 3);
        let step = extract_time_features(&first_pulse(&syn, profile.v_rec), &cfg).map_err(|e| e.to_string())?;
        let raw = extract_time_features(&first_pulse(&syn, 0.0), &cfg).map_err(|e| e.to_string())?;
        let os_oracle = 100.0 * (-std::f64::consts::PI * zeta / (1.0 - zeta * zeta).sqrt()).exp();
        let ts_oracle = 3.0 / (zeta * omega_n);
        let d_os = (step.pct_os - os_oracle).abs();
        let d_ts = (step.t_settle / ts_oracle - 1.0).abs();
        let d_ssv = (raw.ssv / profile.v_dom - 1.0).abs();
        ok &= d_os <= 0.5 && d_ts <= 0.15 && d_ssv <= 0.005;
        lines.push(format!(
            "zeta {zeta}: %OS err {d_os:.3} pt, settle err {:.1}%, SSV err {:.3}%",
            100.0 * d_ts,
            100.0 * d_ssv
        ));
    }
    ensure(ok, lines.join("; "))
}

fn brute_mnf(spec: &Spectrum) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (f, p) in spec.freqs.iter().zip(&spec.psd) {
        num += f * p;
        den += p;
    }
    num / den
}

fn brute_mdf(spec: &Spectrum) -> f64 {
    let n = spec.psd.len();
    let mut best = (f64::INFINITY, 0);
    for m in 0..n {
        let lower: f64 = spec.psd[..=m].iter().sum();
        let upper: f64 = spec.psd[m..].iter().sum();
        let gap = (lower - upper).abs();
        if gap < best.0 {
            best = (gap, m);
        }
    }
    spec.freqs[best.1]
}

fn spectral_oracles() -> Check {
    let fs = 2e6;
    let welch = WelchConfig {
        detrend: Detrend::None,
        ..Default::default()
    };
    // Parseval: power of A sin is A^2 / 2
    let mut worst_parseval: f64 = 0.0;
    for (amp, f0) in [(1.0, 5e4), (0.3, 1.3e5), (2.0, 3.1e5)] {
        let x: Vec<f64> = (0..8192).map(|i| amp * (TWO_PI * f0 * i as f64 / fs).sin()).collect();
        let total = welch_psd(&x, fs, &welch).map_err(|e| e.to_string())?.total_power();
        worst_parseval = worst_parseval.max((total / (amp * amp / 2.0) - 1.0).abs());
    }

    let spectra: Vec<Vec<f64>> = vec![
        vec![1.0, 2.0, 3.0, 2.0, 1.0],
        vec![0.0, 0.0, 5.0, 0.0],
        vec![4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0],
        vec![0.1, 0.2, 9.0, 0.3, 0.3, 0.2, 8.0],
        (0..65).map(|i| ((i as f64) * 0.37).sin().abs() + 0.01).collect(),
    ];
    let mut freq_ok = true;
    for psd in spectra {
        let n = psd.len();
        let spec = Spectrum {
            freqs: (0..n).map(|i| 1e3 * i as f64).collect(),
            psd,
            fs: 2e3 * n as f64,
        };
        let mnf = mean_frequency(&spec).map_err(|e| e.to_string())?;
        let mdf = median_frequency(&spec).map_err(|e| e.to_string())?;
        freq_ok &= (mnf - brute_mnf(&spec)).abs() <= 1e-9 * mnf.abs().max(1.0) && mdf == brute_mdf(&spec);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_snr: f64 = 0.0;
    for sigma in [0.02, 0.05, 0.1] {
        let noise = Normal::new(0.0, sigma).unwrap();
        let ideal: Vec<f64> = (0..400).map(|i| if i < 300 { 3.5 } else { 2.5 }).collect();
        let noisy: Vec<f64> = ideal.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let cfg = PulseConfig {
            tail_margin: 99,
            fall_guard: 0,
        };
        let p = Pulse::dominant(&noisy, fs, 0, 300, &cfg);
        let p_sig: f64 = ideal.iter().map(|v| v * v).sum();
        let p_noise: f64 = noisy.iter().zip(&ideal).map(|(a, b)| (a - b) * (a - b)).sum();
        let oracle = 10.0 * (p_sig / p_noise).log10();
        let measured = snr_db(&p, IdealLevels::default(), &welch).map_err(|e| e.to_string())?;
        worst_snr = worst_snr.max((measured - oracle).abs());
    }

    ensure(
        worst_parseval <= 0.05 && freq_ok && worst_snr <= 1.5,
        format!(
            "Parseval err {:.2}%, MNF/MDF brute-force match {freq_ok}, SNR err {worst_snr:.3} dB",
            100.0 * worst_parseval
        ),
    )
}

fn preprocess_robustness() -> Check {
    let fs = 1e6;
    let period = 100usize;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut reject_ok = true;
    for _ in 0..200 {
        let n = rng.random_range(3..30);
        let regular: Vec<usize> = (0..n).map(|k| 10 + k * period).collect();
        let mut injected = Vec::new();
        for _ in 0..rng.random_range(1..6) {
            let k = rng.random_range(0..n);
            injected.push(regular[k] + rng.random_range(15..85));
        }
        let mut all: Vec<usize> = regular.iter().chain(&injected).copied().collect();
        all.sort_unstable();
        all.dedup();
        let edges = EdgeSet::from_indices(all.clone(), all, fs);
        let expected = 0.9 * period as f64 / fs;
        let once = reject_out_of_bound(&edges, expected);
        reject_ok &= injected.iter().all(|i| !once.rising_idx.contains(i));
        reject_ok &= reject_out_of_bound(&once, expected) == once;
    }

    let timing = default_bits();
    let mut counts_ok = true;
    let mut traces = 0;
    for profile in default_profiles() {
        for seed in 0..5 {
            let syn = synth(&profile, &timing, seed);
            let pulses = segment(&syn.trace, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
            counts_ok &= dominant_pulses(pulses).len() == timing.n_bits;
            traces += 1;
        }
    }
    ensure(
        reject_ok && counts_ok,
        format!("200 injected-edge cases removed and idempotent: {reject_ok}; {traces} clean traces give {} pulses: {counts_ok}", timing.n_bits),
    )
}

fn columns(ds: &LabeledDataset, set: StandardSet) -> Vec<String> {
    FeatureSetDef::standard(set).columns(&ds.feature_names)
}

fn end_to_end(ds: &LabeledDataset) -> Check {
    let cfg = TrialConfig::default();
    let mut means = BTreeMap::new();
    for set in [StandardSet::M1, StandardSet::M2, StandardSet::M2opt] {
        let sub = ds.select_features(&columns(ds, set)).map_err(|e| e.to_string())?;
        let r = run_trials(&sub, &cfg, 20, 1).map_err(|e| e.to_string())?;
        means.insert(set.name(), (r.mean, r.std));
    }
    let (m1, m2, opt) = (means["M1"].0, means["M2"].0, means["M2opt"].0);
    ensure(
        opt >= 0.95 && m2 >= m1 && (m2 - opt).abs() <= 0.015,
        format!(
            "20 trials: M1 {:.4}±{:.4}, M2 {:.4}±{:.4}, M2opt (5 features) {:.4}±{:.4}",
            m1, means["M1"].1, m2, means["M2"].1, opt, means["M2opt"].1
        ),
    )
}

fn convergence(ds: &LabeledDataset) -> Check {
    let cols = columns(ds, StandardSet::M2opt);
    let res = sweep_hyperparameters(ds, &cols, &[500, 3000], &[275], &TrialConfig::default(), 10, 1)
        .map_err(|e| e.to_string())?;
    let a = res.cell(500, 275).ok_or("missing 500-epoch cell")?.mean;
    let b = res.cell(3000, 275).ok_or("missing 3000-epoch cell")?.mean;
    ensure(
        (a - b).abs() <= 0.005,
        format!("10 trials, 275 units: 500 epochs {a:.4}, 3000 epochs {b:.4}, gap {:.2} pt", 100.0 * (a - b).abs()),
    )
}

fn snapshot(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            snapshot(&path, out);
        } else {
            out.insert(path.display().to_string(), fs::read(&path).unwrap());
        }
    }
}

fn pipeline(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    if root.exists() {
        fs::remove_dir_all(root).map_err(|e| e.to_string())?;
    }
    fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let (cfg, features) = tiny_corpus(root, 2);
    let out = root.join("run").display().to_string();
    let model = format!("{out}/model.json");
    let steps: Vec<Vec<&str>> = vec![
        vec!["train", "--set", "M2opt"],
        vec!["evaluate", "--set", "M2opt", "--model", &model],
        vec!["rank-features"],
        vec!["tune"],
        vec!["report"],
    ];
    for step in steps {
        let mut args = step.clone();
        args.extend(["--config", &cfg, "--out", &out, "--features", &features, "--seed", "11"]);
        let (code, _, err) = ecufp(&args);
        if code != 0 {
            return Err(format!("{} failed: {err}", step[0]));
        }
    }
    let mut files = BTreeMap::new();
    snapshot(root, &mut files);
    Ok(files)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("pipeline");
    let first = pipeline(&root)?;
    let second = pipeline(&root)?;
    let differing: Vec<&String> = first
        .keys()
        .filter(|k| second.get(*k) != first.get(*k))
        .collect();
    ensure(
        first.len() == second.len() && differing.is_empty(),
        format!("{} files across generate..report, differing: {differing:?}", first.len()),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, start: Instant, result: Check| {
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("PASS criterion {n} ({name}, {secs:.1} s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}, {secs:.1} s): {msg}");
            }
        }
    };

    let t = Instant::now();
    report(1, "gradient oracle", t, gradient_oracle());
    let t = Instant::now();
    report(2, "learner sanity", t, learner_sanity());
    let t = Instant::now();
    report(3, "feature-extractor oracle", t, feature_oracle());
    let t = Instant::now();
    report(4, "spectral oracles", t, spectral_oracles());
    let t = Instant::now();
    report(5, "preprocess robustness", t, preprocess_robustness());

    let t = Instant::now();
    let ds = default_corpus_dataset(7);
    report(6, "end-to-end directional", t, end_to_end(&ds));
    let t = Instant::now();
    report(7, "convergence", t, convergence(&ds));
    let t = Instant::now();
    report(8, "determinism", t, determinism());

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
