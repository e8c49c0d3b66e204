//! Logistic regression, Gaussian naive Bayes and SVM classifiers over
//! feature vectors, trained from scratch.
//!
//! Logistic regression and the SVM see z-scored inputs; naive Bayes works on
//! raw feature values. Linear SVMs are trained with Pegasos (stochastic
//! subgradient descent on the hinge loss); RBF SVMs solve the dual with SMO
//! using maximal-violating-pair working set selection.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model feature names {found:?} do not match expected {expected:?}")]
    FeatureNameMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>, feature_names: Vec<String>) -> Result<Self, ClassifyError> {
        if x.len() != y.len() {
            return Err(ClassifyError::InvalidDataset(format!(
                "{} rows but {} labels",
                x.len(),
                y.len()
            )));
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(ClassifyError::InvalidDataset(format!(
                    "row {i} has {} values for {} feature names",
                    row.len(),
                    feature_names.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ClassifyError::InvalidDataset(format!("row {i} has a non-finite value")));
            }
        }
        if let Some(bad) = y.iter().find(|&&l| l > 1) {
            return Err(ClassifyError::InvalidDataset(format!("label {bad} is not 0 or 1")));
        }
        Ok(Dataset { x, y, feature_names })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Multiplies one feature column by `factor`.
    pub fn scale_column(&mut self, column: usize, factor: f64) {
        for row in &mut self.x {
            row[column] *= factor;
        }
    }

    /// Splits into (train, test) keeping each class's share of the test set
    /// at `test_fraction` (rounded).
    pub fn stratified_split(&self, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [0u8, 1] {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.y[i] == class).collect();
            idx.shuffle(&mut rng);
            let n_test = (idx.len() as f64 * test_fraction).round() as usize;
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        (self.subset(&train), self.subset(&test))
    }

    fn check_both_classes(&self) -> Result<(), ClassifyError> {
        if self.len() < 2 || !self.y.contains(&0) || !self.y.contains(&1) {
            return Err(ClassifyError::SingleClass);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Gnb,
    Svm,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logreg" => Ok(ModelKind::Logreg),
            "gnb" => Ok(ModelKind::Gnb),
            "svm" => Ok(ModelKind::Svm),
            other => Err(format!("unknown model kind {other:?} (expected logreg, gnb or svm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 strength for logistic regression; for the SVM, lambda in the
    /// Pegasos objective, which maps to C = 1 / (lambda * n) in the dual.
    pub regularization: f64,
    /// RBF width; `None` means 1 / (n_features * variance of the standardized inputs).
    pub gamma: Option<f64>,
    pub kernel: SvmKernel,
    pub smo_tolerance: f64,
    pub smo_max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: 1000,
            learning_rate: 0.1,
            regularization: 1e-3,
            gamma: None,
            kernel: SvmKernel::Rbf,
            smo_tolerance: 1e-3,
            smo_max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Constant columns get std 1 so they map to 0.
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogReg {
    pub fn zeros(d: usize) -> Self {
        LogReg {
            weights: vec![0.0; d],
            bias: 0.0,
        }
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean log loss plus `lambda / 2 * |w|^2` (bias unregularized), with its
/// gradient as (d/dw, d/db).
pub fn logreg_loss_and_grad(model: &LogReg, x: &[Vec<f64>], y: &[u8], lambda: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = dot(&model.weights, row) + model.bias;
        let t = f64::from(label);
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + lambda * w;
    }
    loss += 0.5 * lambda * dot(&model.weights, &model.weights);
    (loss, gw, gb)
}

/// Full-batch gradient descent from zero weights. Returns the model and the
/// loss recorded at the start of each epoch.
pub fn fit_logreg(x: &[Vec<f64>], y: &[u8], cfg: &TrainConfig) -> Result<(LogReg, Vec<f64>), ClassifyError> {
    let d = x.first().map_or(0, Vec::len);
    let mut model = LogReg::zeros(d);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, gw, gb) = logreg_loss_and_grad(&model, x, y, cfg.regularization);
        if !loss.is_finite() {
            return Err(ClassifyError::NonFiniteLoss { epoch });
        }
        history.push(loss);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * g;
        }
        model.bias -= cfg.learning_rate * gb;
    }
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class label.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub epsilon: f64,
}

pub const GNB_VAR_SMOOTHING: f64 = 1e-9;

/// Variance floor: `GNB_VAR_SMOOTHING` times the largest per-feature
/// variance of the whole dataset (or `GNB_VAR_SMOOTHING` itself when every
/// feature is constant).
pub fn gnb_epsilon(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(0, Vec::len);
    let n = x.len() as f64;
    let max_var = (0..d)
        .map(|j| {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            x.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n
        })
        .fold(0.0, f64::max);
    if max_var > 0.0 {
        GNB_VAR_SMOOTHING * max_var
    } else {
        GNB_VAR_SMOOTHING
    }
}

pub fn fit_gnb(x: &[Vec<f64>], y: &[u8]) -> GaussianNb {
    let d = x.first().map_or(0, Vec::len);
    let epsilon = gnb_epsilon(x);
    let mut priors = [0.0; 2];
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut variances = [vec![0.0; d], vec![0.0; d]];
    for class in 0..2u8 {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == class).map(|(r, _)| r).collect();
        let c = class as usize;
        let n = rows.len() as f64;
        priors[c] = n / x.len() as f64;
        for j in 0..d {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
            means[c][j] = m;
            variances[c][j] = v + epsilon;
        }
    }
    GaussianNb {
        priors,
        means,
        variances,
        epsilon,
    }
}

impl GaussianNb {
    fn log_joint(&self, class: usize, x: &[f64]) -> f64 {
        let mut lj = self.priors[class].ln();
        for ((v, m), var) in x.iter().zip(&self.means[class]).zip(&self.variances[class]) {
            lj -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (v - m) * (v - m) / var);
        }
        lj
    }

    /// Posterior probability of class 1.
    pub fn probability(&self, x: &[f64]) -> f64 {
        let l0 = self.log_joint(0, x);
        let l1 = self.log_joint(1, x);
        let m = l0.max(l1);
        let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
        e1 / (e0 + e1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum Svm {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Rbf {
        gamma: f64,
        support_vectors: Vec<Vec<f64>>,
        /// alpha_i * y_i with y in {-1, +1}.
        coefficients: Vec<f64>,
        bias: f64,
    },
}

impl Svm {
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            Svm::Linear { weights, bias } => dot(weights, x) + bias,
            Svm::Rbf {
                gamma,
                support_vectors,
                coefficients,
                bias,
            } => {
                support_vectors
                    .iter()
                    .zip(coefficients)
                    .map(|(sv, c)| c * rbf(sv, x, *gamma))
                    .sum::<f64>()
                    + bias
            }
        }
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Pegasos with the bias folded in as a weight on a constant input.
pub fn fit_pegasos(x: &[Vec<f64>], y: &[u8], cfg: &TrainConfig) -> Result<Svm, ClassifyError> {
    let d = x.first().map_or(0, Vec::len);
    let lambda = cfg.regularization;
    let mut w = vec![0.0; d + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = 0usize;
    for epoch in 0..cfg.epochs {
        for _ in 0..x.len() {
            t += 1;
            let i = rng.gen_range(0..x.len());
            let eta = 1.0 / (lambda * t as f64);
            let yi = signed(y[i]);
            let m = yi * (dot(&w[..d], &x[i]) + w[d]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if m < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * yi * xj;
                }
                w[d] += eta * yi;
            }
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::NonFiniteLoss { epoch });
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    Ok(Svm::Linear { weights: w, bias })
}

/// Default RBF width: 1 / (n_features * var(X)) over all entries.
pub fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(1, Vec::len).max(1);
    let all: Vec<f64> = x.iter().flatten().copied().collect();
    let n = all.len().max(1) as f64;
    let m = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}

/// SMO on the C-SVM dual with an RBF kernel.
pub fn fit_smo(x: &[Vec<f64>], y: &[u8], cfg: &TrainConfig) -> Svm {
    const TAU: f64 = 1e-12;
    let n = x.len();
    let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(x));
    let c = 1.0 / (cfg.regularization * n as f64);
    let ys: Vec<f64> = y.iter().map(|&l| signed(l)).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(&x[i], &x[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| ys[i] * ys[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    for _ in 0..cfg.smo_max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if in_up(alpha[t], ys[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], ys[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < cfg.smo_tolerance {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // rho: average y*G over free vectors, else the midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            coefficients.push(alpha[t] * ys[t]);
        }
    }
    Svm::Rbf {
        gamma,
        support_vectors,
        coefficients,
        bias: -rho,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "lowercase")]
pub enum Parameters {
    Logreg(LogReg),
    Gnb(GaussianNb),
    Svm(Svm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub version: u32,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
    #[serde(flatten)]
    pub parameters: Parameters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    /// Class-1 probability (logreg, gnb) or signed margin (svm).
    pub score: f64,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self.parameters {
            Parameters::Logreg(_) => ModelKind::Logreg,
            Parameters::Gnb(_) => ModelKind::Gnb,
            Parameters::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifyError> {
        if x.len() != self.n_features() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let scaled;
        let input = match &self.standardizer {
            Some(s) => {
                scaled = s.transform(x);
                &scaled[..]
            }
            None => x,
        };
        let (score, threshold) = match &self.parameters {
            Parameters::Logreg(m) => (m.probability(input), 0.5),
            Parameters::Gnb(m) => (m.probability(input), 0.5),
            Parameters::Svm(m) => (m.margin(input), 0.0),
        };
        Ok(Prediction {
            label: u8::from(score >= threshold),
            score,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        fs::write(path, self.to_json()).map_err(|e| ClassifyError::Io(e.to_string()))
    }

    /// Loads a model and checks it was trained on `expected_features`.
    pub fn load(path: &Path, expected_features: &[String]) -> Result<Model, ClassifyError> {
        let text = fs::read_to_string(path).map_err(|e| ClassifyError::Io(e.to_string()))?;
        Self::from_json(&text, expected_features)
    }

    pub fn from_json(text: &str, expected_features: &[String]) -> Result<Model, ClassifyError> {
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| ClassifyError::Io(e.to_string()))?;
        let version = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_FORMAT_VERSION {
            return Err(ClassifyError::Version(version));
        }
        let model: Model = serde_json::from_value(probe).map_err(|e| ClassifyError::Io(e.to_string()))?;
        if model.feature_names != expected_features {
            return Err(ClassifyError::FeatureNameMismatch {
                expected: expected_features.to_vec(),
                found: model.feature_names,
            });
        }
        Ok(model)
    }
}

pub fn train(kind: ModelKind, data: &Dataset, cfg: &TrainConfig) -> Result<Model, ClassifyError> {
    data.check_both_classes()?;
    let (parameters, standardizer) = match kind {
        ModelKind::Gnb => (Parameters::Gnb(fit_gnb(data.x(), data.y())), None),
        ModelKind::Logreg | ModelKind::Svm => {
            let std = Standardizer::fit(data.x());
            let xs: Vec<Vec<f64>> = data.x().iter().map(|r| std.transform(r)).collect();
            let params = match (kind, cfg.kernel) {
                (ModelKind::Logreg, _) => Parameters::Logreg(fit_logreg(&xs, data.y(), cfg)?.0),
                (_, SvmKernel::Linear) => Parameters::Svm(fit_pegasos(&xs, data.y(), cfg)?),
                (_, SvmKernel::Rbf) => Parameters::Svm(fit_smo(&xs, data.y(), cfg)),
            };
            (params, Some(std))
        }
    };
    Ok(Model {
        version: MODEL_FORMAT_VERSION,
        feature_names: data.feature_names().to_vec(),
        standardizer,
        parameters,
    })
}

pub fn predict(model: &Model, x: &[f64]) -> Result<Prediction, ClassifyError> {
    model.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Binary metrics with class 1 as positive; undefined ratios are 0.
pub fn metrics_from_labels(actual: &[u8], predicted: &[u8]) -> Metrics {
    let mut m = Metrics::default();
    for (&a, &p) in actual.iter().zip(predicted) {
        match (a, p) {
            (1, 1) => m.tp += 1,
            (0, 1) => m.fp += 1,
            (1, _) => m.fn_ += 1,
            _ => m.tn += 1,
        }
    }
    metrics_from_counts(m.tp, m.fp, m.tn, m.fn_)
}

pub fn metrics_from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Metrics {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        accuracy: ratio(tp + tn, tp + fp + tn + fn_),
        precision,
        recall,
        f1,
        tp,
        fp,
        tn,
        fn_,
    }
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<Metrics, ClassifyError> {
    let predicted = data
        .x()
        .iter()
        .map(|row| model.predict(row).map(|p| p.label))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(metrics_from_labels(data.y(), &predicted))
}
