//! Single-hidden-layer perceptron classifier trained with Adam.
//!
//! Inputs are standardized with training-set statistics; zero-variance columns
//! are dropped and remembered so prediction still takes full-width rows. The
//! network is `input -> ReLU(hidden) -> softmax(classes)` with mean
//! cross-entropy loss, trained in f64 for a fixed number of epochs.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::LabeledDataset;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub epochs: usize,
    /// Upper bound on the mini-batch size; the effective size is
    /// `min(batch_size, n_train)`.
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_units: 275,
            epochs: 500,
            batch_size: 200,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            activation: Activation::Relu,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "hidden_units, epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0,1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Network weights. `w1` is input x hidden, `w2` is hidden x classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Params {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Params {
            w1: Array2::zeros((inputs, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, outputs)),
            b2: Array1::zeros(outputs),
        }
    }

    /// Uniform init with bounds `sqrt(6/fan_in)` (hidden) and `sqrt(3/fan_in)` (output).
    pub fn init(inputs: usize, hidden: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut p = Params::zeros(inputs, hidden, outputs);
        let a1 = (6.0 / inputs as f64).sqrt();
        p.w1.mapv_inplace(|_| rng.random_range(-a1..a1));
        let a2 = (3.0 / hidden as f64).sqrt();
        p.w2.mapv_inplace(|_| rng.random_range(-a2..a2));
        p
    }

    pub fn inputs(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w2.ncols()
    }

    /// Flat views of every parameter, in a fixed order.
    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    /// Class probabilities for already standardized rows.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (_, _, probs) = self.forward_full(x);
        probs
    }

    fn forward_full(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let z1 = x.dot(&self.w1) + &self.b1;
        let h = z1.mapv(|v| v.max(0.0));
        let mut probs = h.dot(&self.w2) + &self.b2;
        for mut row in probs.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        (z1, h, probs)
    }
}

/// Mean cross-entropy over the batch and its analytic gradient.
pub fn loss_and_gradients(params: &Params, x: ArrayView2<f64>, y: &[usize]) -> (f64, Params) {
    assert!(!y.is_empty() && x.nrows() == y.len(), "batch must be non-empty");
    let n = y.len() as f64;
    let (z1, h, probs) = params.forward_full(x);

    let loss = y
        .iter()
        .enumerate()
        .map(|(i, &c)| -probs[[i, c]].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n;

    let mut d2 = probs;
    for (i, &c) in y.iter().enumerate() {
        d2[[i, c]] -= 1.0;
    }
    d2.mapv_inplace(|v| v / n);

    let w2 = h.t().dot(&d2);
    let b2 = d2.sum_axis(Axis(0));
    let mut d1 = d2.dot(&params.w2.t());
    Zip::from(&mut d1).and(&z1).for_each(|d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let w1 = x.t().dot(&d1);
    let b1 = d1.sum_axis(Axis(0));
    (loss, Params { w1, b1, w2, b2 })
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    fn new(p: &Params) -> Self {
        let zeros = Params::zeros(p.inputs(), p.hidden(), p.outputs());
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Params, grads: &Params, cfg: &MlpConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let step = cfg.lr * c2.sqrt() / c1;
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut())
        {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= step * m[i] / (v[i].sqrt() + cfg.eps);
            }
        }
    }
}

/// Per-feature standardization fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    /// Mean of each retained feature.
    pub mean: Vec<f64>,
    /// Population standard deviation of each retained feature.
    pub std: Vec<f64>,
    /// Names of zero-variance features excluded from the network.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub scaler: Scaler,
    /// Indices into `feature_names` of the columns the network consumes.
    retained: Vec<usize>,
    pub params: Params,
    pub config: MlpConfig,
}

/// Training output: the model and the mean loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub loss_curve: Vec<f64>,
}

pub fn train(dataset: &LabeledDataset, cfg: &MlpConfig) -> Result<MlpModel> {
    Ok(train_with_history(dataset, cfg)?.model)
}

pub fn train_with_history(dataset: &LabeledDataset, cfg: &MlpConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let n = dataset.len();
    let k = dataset.class_names.len();
    let mut present = vec![false; k];
    for &c in &dataset.y {
        present[c] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Training(
            "need samples from at least 2 classes".into(),
        ));
    }

    let (scaler, retained) = fit_scaler(dataset);
    if retained.is_empty() {
        log::warn!("every feature has zero variance; the model can only learn class priors");
    }
    for name in &scaler.dropped {
        log::warn!("dropping zero-variance feature `{name}`");
    }
    let x = standardize(dataset.x.view(), &retained, &scaler);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::init(retained.len(), cfg.hidden_units, k, &mut rng);
    let mut adam = Adam::new(&params);
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| dataset.y[i]).collect();
            let (loss, grads) = loss_and_gradients(&params, xb.view(), &yb);
            adam.step(&mut params, &grads, cfg);
            epoch_loss += loss * chunk.len() as f64;
        }
        loss_curve.push(epoch_loss / n as f64);
    }

    Ok(TrainedModel {
        model: MlpModel {
            feature_names: dataset.feature_names.clone(),
            classes: dataset.class_names.clone(),
            scaler,
            retained,
            params,
            config: *cfg,
        },
        loss_curve,
    })
}

fn fit_scaler(dataset: &LabeledDataset) -> (Scaler, Vec<usize>) {
    let n = dataset.len() as f64;
    let mut scaler = Scaler {
        mean: Vec::new(),
        std: Vec::new(),
        dropped: Vec::new(),
    };
    let mut retained = Vec::new();
    for (j, col) in dataset.x.columns().into_iter().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            scaler.dropped.push(dataset.feature_names[j].clone());
        } else {
            retained.push(j);
            scaler.mean.push(mean);
            scaler.std.push(std);
        }
    }
    (scaler, retained)
}

fn standardize(x: ArrayView2<f64>, retained: &[usize], scaler: &Scaler) -> Array2<f64> {
    let mut out = x.select(Axis(1), retained);
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let (m, s) = (scaler.mean[j], scaler.std[j]);
        col.mapv_inplace(|v| (v - m) / s);
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    // first maximum wins, so ties go to the lowest class index
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

impl MlpModel {
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// Standardized view of full-width raw rows, as the network sees them.
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        Ok(standardize(x, &self.retained, &self.scaler))
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.params.forward(self.transform(x)?.view()))
    }

    /// Predicted label and class probabilities for one raw feature row.
    pub fn predict(&self, row: &[f64]) -> Result<(usize, Vec<f64>)> {
        let x = ArrayView2::from_shape((1, row.len()), row)
            .map_err(|e| Error::Input(e.to_string()))?;
        let probs = self.predict_proba(x)?;
        let probs = probs.row(0).to_vec();
        Ok((argmax(&probs), probs))
    }

    pub fn predict_labels(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let probs = self.predict_proba(x)?;
        Ok(probs
            .rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("standard layout")))
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&ModelFile::from(self))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Load(format!("malformed model: {e}")))?;
        file.into_model()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    feature_names: Vec<String>,
    classes: Vec<String>,
    scaler: Scaler,
    layers: Vec<LayerFile>,
    config: MlpConfig,
}

fn layer_file(w: &Array2<f64>, b: &Array1<f64>) -> LayerFile {
    LayerFile {
        w: w.rows().into_iter().map(|r| r.to_vec()).collect(),
        b: b.to_vec(),
    }
}

impl From<&MlpModel> for ModelFile {
    fn from(m: &MlpModel) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            feature_names: m.feature_names.clone(),
            classes: m.classes.clone(),
            scaler: m.scaler.clone(),
            layers: vec![
                layer_file(&m.params.w1, &m.params.b1),
                layer_file(&m.params.w2, &m.params.b2),
            ],
            config: m.config,
        }
    }
}

fn matrix(rows: Vec<Vec<f64>>, cols: usize, what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Load(format!("{what} rows must have {cols} columns")));
    }
    Array2::from_shape_vec((n, cols), rows.concat()).map_err(|e| Error::Load(e.to_string()))
}

impl ModelFile {
    fn into_model(self) -> Result<MlpModel> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::Load(format!(
                "unsupported model version {} (expected {MODEL_FORMAT_VERSION})",
                self.version
            )));
        }
        let retained: Vec<usize> = self
            .feature_names
            .iter()
            .enumerate()
            .filter(|(_, n)| !self.scaler.dropped.contains(n))
            .map(|(i, _)| i)
            .collect();
        let [hidden, output]: [LayerFile; 2] = self
            .layers
            .try_into()
            .map_err(|_| Error::Load("expected exactly 2 layers".into()))?;
        let n_hidden = hidden.b.len();
        let w1 = matrix(hidden.w, n_hidden, "hidden layer")?;
        let w2 = matrix(output.w, output.b.len(), "output layer")?;
        let consistent = w1.nrows() == retained.len()
            && self.scaler.mean.len() == retained.len()
            && self.scaler.std.len() == retained.len()
            && w2.nrows() == n_hidden
            && w2.ncols() == self.classes.len();
        if !consistent {
            return Err(Error::Load("layer dimensions are inconsistent".into()));
        }
        if self.scaler.std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Load("scaler std must be > 0".into()));
        }
        Ok(MlpModel {
            feature_names: self.feature_names,
            classes: self.classes,
            scaler: self.scaler,
            retained,
            params: Params {
                w1,
                b1: Array1::from(hidden.b),
                w2,
                b2: Array1::from(output.b),
            },
            config: self.config,
        })
    }
}
