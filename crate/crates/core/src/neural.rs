//! A small word-level neural language model written from scratch in f64.
//!
//! Architecture: embedding, two stacked LSTM layers each followed by
//! dropout, a tanh dense layer and a softmax output layer. The model reads a
//! window of `sequence_length` tokens and predicts the next one; the loss is
//! the cross-entropy of that prediction. Training is plain minibatch SGD with
//! global gradient-norm clipping.
//!
//! LSTM gates follow the usual formulation with gate order input, forget,
//! cell, output:
//!
//! ```text
//! z = W [x; h_prev] + b
//! i = sigmoid(z_i)  f = sigmoid(z_f)  g = tanh(z_g)  o = sigmoid(z_o)
//! c = f * c_prev + i * g
//! h = o * tanh(c)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const UNK: &str = "<unk>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const NEURAL_FORMAT_VERSION: u32 = 1;
pub const INIT_RANGE: f64 = 0.08;
pub const CLIP_NORM: f64 = 5.0;
/// Parameter range used when gradient checking.
pub const GRAD_CHECK_RANGE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("no training sequences")]
    EmptySequences,
    #[error("sequence {sequence} has length {got}, expected {expected}")]
    WindowLength {
        sequence: usize,
        expected: usize,
        got: usize,
    },
    #[error("token index {index} out of range for vocabulary of {vocab_size}")]
    IndexOutOfRange { index: usize, vocab_size: usize },
    #[error("model file: {0}")]
    Io(String),
    #[error("model file is not valid: {0}")]
    Parse(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub sequence_length: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            vocab_size: 2,
            embed_dim: 32,
            hidden_dim: 64,
            dropout_rate: 0.2,
            sequence_length: 4,
            seed: 0,
            learning_rate: 0.5,
            epochs: 20,
            batch_size: 16,
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("sequence_length", self.sequence_length),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(NeuralError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NeuralError::InvalidConfig(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(NeuralError::InvalidConfig(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Index 0 is [`UNK`], index 1 is [`EOS_TOKEN`], then tokens by
    /// descending count (ties alphabetical), capped at `max_size` entries
    /// in total when given.
    pub fn build(sequences: &[Vec<String>], max_size: Option<usize>) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in sequences {
            for t in s {
                if t != UNK && t != EOS_TOKEN {
                    *counts.entry(t.as_str()).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens = vec![UNK.to_string(), EOS_TOKEN.to_string()];
        let limit = max_size.map_or(usize::MAX, |m| m.saturating_sub(2));
        tokens.extend(ranked.into_iter().take(limit).map(|(t, _)| t.to_string()));
        Self::from_tokens(tokens)
    }

    /// Vocabulary of `size` synthetic tokens, for tests and shape checks.
    pub fn placeholder(size: usize) -> Self {
        let mut tokens = vec![UNK.to_string(), EOS_TOKEN.to_string()];
        tokens.extend((2..size.max(2)).map(|i| format!("w{i}")));
        tokens.truncate(size.max(1));
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(UNK, String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }
}

/// Training windows of `sequence_length + 1` ids (inputs then target) over
/// each sequence followed by [`EOS_ID`].
pub fn make_windows(vocab: &Vocab, sequences: &[Vec<String>], sequence_length: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for s in sequences {
        let mut ids = vocab.encode(s);
        ids.push(EOS_ID);
        for w in ids.windows(sequence_length + 1) {
            out.push(w.to_vec());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    start: usize,
    len: usize,
}

impl Span {
    fn range(self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    v: usize,
    d: usize,
    h: usize,
    embed: Span,
    lstm_w: [Span; 2],
    lstm_b: [Span; 2],
    dense1_w: Span,
    dense1_b: Span,
    dense2_w: Span,
    dense2_b: Span,
    total: usize,
}

impl Layout {
    fn new(v: usize, d: usize, h: usize) -> Self {
        let mut at = 0;
        let mut take = |len: usize| {
            let s = Span { start: at, len };
            at += len;
            s
        };
        let embed = take(v * d);
        let w0 = take(4 * h * (d + h));
        let b0 = take(4 * h);
        let w1 = take(4 * h * (h + h));
        let b1 = take(4 * h);
        let dense1_w = take(h * h);
        let dense1_b = take(h);
        let dense2_w = take(v * h);
        let dense2_b = take(v);
        Layout {
            v,
            d,
            h,
            embed,
            lstm_w: [w0, w1],
            lstm_b: [b0, b1],
            dense1_w,
            dense1_b,
            dense2_w,
            dense2_b,
            total: at,
        }
    }

    fn input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.d
        } else {
            self.h
        }
    }

    fn tensors(&self) -> Vec<(&'static str, Span, Vec<usize>)> {
        let (v, d, h) = (self.v, self.d, self.h);
        vec![
            ("embedding", self.embed, vec![v, d]),
            ("lstm1.weight", self.lstm_w[0], vec![4 * h, d + h]),
            ("lstm1.bias", self.lstm_b[0], vec![4 * h]),
            ("lstm2.weight", self.lstm_w[1], vec![4 * h, h + h]),
            ("lstm2.bias", self.lstm_b[1], vec![4 * h]),
            ("dense1.weight", self.dense1_w, vec![h, h]),
            ("dense1.bias", self.dense1_b, vec![h]),
            ("dense2.weight", self.dense2_w, vec![v, h]),
            ("dense2.bias", self.dense2_b, vec![v]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct NeuralLM {
    config: NeuralConfig,
    vocab: Vocab,
    layout: Layout,
    params: Vec<f64>,
    mode: Mode,
}

impl PartialEq for NeuralLM {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.vocab == other.vocab && self.params == other.params
    }
}

struct LstmStep {
    /// [x; h_prev]
    input: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

struct Masks {
    layer1: Vec<Vec<f64>>,
    layer2: Vec<f64>,
}

struct Cache {
    layers: [Vec<LstmStep>; 2],
    masks: Option<Masks>,
    u: Vec<f64>,
    s: Vec<f64>,
    logits: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// out = W x + b for a row-major `rows x x.len()` matrix.
fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| {
            bias + w[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(a, c)| a * c)
                .sum::<f64>()
        })
        .collect()
}

/// Adds the outer product dy x^T into `gw` and returns W^T dy.
fn affine_backward(w: &[f64], gw: &mut [f64], gb: &mut [f64], x: &[f64], dy: &[f64]) -> Vec<f64> {
    let cols = x.len();
    let mut dx = vec![0.0; cols];
    for (r, &d) in dy.iter().enumerate() {
        gb[r] += d;
        if d == 0.0 {
            continue;
        }
        let row = r * cols;
        for c in 0..cols {
            gw[row + c] += d * x[c];
            dx[c] += d * w[row + c];
        }
    }
    dx
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

impl NeuralLM {
    /// Parameters are drawn uniformly from [-0.08, 0.08] by a generator
    /// seeded with `config.seed`.
    pub fn build(config: &NeuralConfig, vocab: Vocab) -> Result<Self, NeuralError> {
        config.validate()?;
        if vocab.len() != config.vocab_size {
            return Err(NeuralError::InvalidConfig(format!(
                "vocab_size {} but vocabulary has {} entries",
                config.vocab_size,
                vocab.len()
            )));
        }
        let layout = Layout::new(config.vocab_size, config.embed_dim, config.hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = (0..layout.total)
            .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        Ok(NeuralLM {
            config: config.clone(),
            vocab,
            layout,
            params,
            mode: Mode::Eval,
        })
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    /// Redraws every parameter uniformly from [-range, range].
    pub fn reinitialize(&mut self, range: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            *p = rng.gen_range(-range..=range);
        }
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Name and shape of every parameter tensor, in storage order.
    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        self.layout.tensors().into_iter().map(|(n, _, s)| (n, s)).collect()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .tensors()
            .into_iter()
            .find(|(n, _, _)| *n == name)
            .map(|(_, span, _)| &self.params[span.range()])
    }

    fn lstm_forward(&self, layer: usize, inputs: &[Vec<f64>]) -> Vec<LstmStep> {
        let h = self.layout.h;
        let w = &self.params[self.layout.lstm_w[layer].range()];
        let b = &self.params[self.layout.lstm_b[layer].range()];
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let mut input = x.clone();
            input.extend_from_slice(&h_prev);
            let z = affine(w, b, &input);
            let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = z[2 * h..3 * h].iter().map(|v| v.tanh()).collect();
            let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
            let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let hn: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(LstmStep {
                input,
                i,
                f,
                g,
                o,
                c_prev: std::mem::replace(&mut c_prev, c),
                tanh_c,
                h: hn.clone(),
            });
            h_prev = hn;
        }
        steps
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), NeuralError> {
        match ids.iter().find(|&&i| i >= self.layout.v) {
            Some(&index) => Err(NeuralError::IndexOutOfRange {
                index,
                vocab_size: self.layout.v,
            }),
            None => Ok(()),
        }
    }

    fn forward(&self, ids: &[usize], masks: Option<Masks>) -> Cache {
        let l = &self.layout;
        let emb = &self.params[l.embed.range()];
        let x1: Vec<Vec<f64>> = ids.iter().map(|&t| emb[t * l.d..(t + 1) * l.d].to_vec()).collect();
        let layer1 = self.lstm_forward(0, &x1);
        let x2: Vec<Vec<f64>> = layer1
            .iter()
            .enumerate()
            .map(|(t, s)| match &masks {
                Some(m) => s.h.iter().zip(&m.layer1[t]).map(|(a, b)| a * b).collect(),
                None => s.h.clone(),
            })
            .collect();
        let layer2 = self.lstm_forward(1, &x2);
        let last = &layer2.last().expect("non-empty input").h;
        let u: Vec<f64> = match &masks {
            Some(m) => last.iter().zip(&m.layer2).map(|(a, b)| a * b).collect(),
            None => last.clone(),
        };
        let a = affine(&self.params[l.dense1_w.range()], &self.params[l.dense1_b.range()], &u);
        let s: Vec<f64> = a.iter().map(|v| v.tanh()).collect();
        let logits = affine(&self.params[l.dense2_w.range()], &self.params[l.dense2_b.range()], &s);
        Cache {
            layers: [layer1, layer2],
            masks,
            u,
            s,
            logits,
        }
    }

    fn lstm_backward(&self, layer: usize, steps: &[LstmStep], dh_ext: &[Vec<f64>], grad: &mut [f64]) -> Vec<Vec<f64>> {
        let h = self.layout.h;
        let in_dim = self.layout.input_dim(layer);
        let w = &self.params[self.layout.lstm_w[layer].range()];
        let (gw_span, gb_span) = (self.layout.lstm_w[layer], self.layout.lstm_b[layer]);
        let mut gw = vec![0.0; gw_span.len];
        let mut gb = vec![0.0; gb_span.len];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dx = vec![Vec::new(); steps.len()];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let mut dz = vec![0.0; 4 * h];
            for k in 0..h {
                let dh = dh_ext[t][k] + dh_next[k];
                let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_o = dh * s.tanh_c[k];
                let d_i = dc * s.g[k];
                let d_g = dc * s.i[k];
                let d_f = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                dz[k] = d_i * s.i[k] * (1.0 - s.i[k]);
                dz[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
                dz[2 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
                dz[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            }
            let dinput = affine_backward(w, &mut gw, &mut gb, &s.input, &dz);
            dh_next = dinput[in_dim..].to_vec();
            dx[t] = dinput[..in_dim].to_vec();
        }
        for (g, v) in grad[gw_span.range()].iter_mut().zip(gw) {
            *g += v;
        }
        for (g, v) in grad[gb_span.range()].iter_mut().zip(gb) {
            *g += v;
        }
        dx
    }

    /// Loss of one window and accumulation of its gradient into `grad`.
    fn loss_and_backward(&self, ids: &[usize], target: usize, masks: Option<Masks>, grad: &mut [f64]) -> f64 {
        let l = self.layout;
        let cache = self.forward(ids, masks);
        let logp = log_softmax(&cache.logits);
        let loss = -logp[target];
        let mut dlogits: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
        dlogits[target] -= 1.0;

        let (head, tail) = grad.split_at_mut(l.dense2_w.start);
        let _ = head;
        let (gw2, gb2) = tail.split_at_mut(l.dense2_w.len);
        let ds = affine_backward(
            &self.params[l.dense2_w.range()],
            gw2,
            &mut gb2[..l.dense2_b.len],
            &cache.s,
            &dlogits,
        );
        let da: Vec<f64> = ds.iter().zip(&cache.s).map(|(d, s)| d * (1.0 - s * s)).collect();
        let (head, tail) = grad.split_at_mut(l.dense1_w.start);
        let _ = head;
        let (gw1, gb1) = tail.split_at_mut(l.dense1_w.len);
        let du = affine_backward(
            &self.params[l.dense1_w.range()],
            gw1,
            &mut gb1[..l.dense1_b.len],
            &cache.u,
            &da,
        );

        let steps = ids.len();
        let mut dh2 = vec![vec![0.0; l.h]; steps];
        dh2[steps - 1] = match &cache.masks {
            Some(m) => du.iter().zip(&m.layer2).map(|(a, b)| a * b).collect(),
            None => du,
        };
        let dx2 = self.lstm_backward(1, &cache.layers[1], &dh2, grad);
        let dh1: Vec<Vec<f64>> = match &cache.masks {
            Some(m) => dx2
                .iter()
                .zip(&m.layer1)
                .map(|(d, mask)| d.iter().zip(mask).map(|(a, b)| a * b).collect())
                .collect(),
            None => dx2,
        };
        let dx1 = self.lstm_backward(0, &cache.layers[0], &dh1, grad);
        for (t, &tok) in ids.iter().enumerate() {
            let row = l.embed.start + tok * l.d;
            for (g, v) in grad[row..row + l.d].iter_mut().zip(&dx1[t]) {
                *g += v;
            }
        }
        loss
    }

    /// Mean loss over `windows` and its gradient, without dropout.
    pub fn batch_loss_and_grad(&self, windows: &[Vec<usize>]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.layout.total];
        let mut loss = 0.0;
        for w in windows {
            let (ids, target) = w.split_at(w.len() - 1);
            loss += self.loss_and_backward(ids, target[0], None, &mut grad);
        }
        let n = windows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Mean loss over `windows` in eval mode.
    pub fn batch_loss(&self, windows: &[Vec<usize>]) -> f64 {
        let total: f64 = windows
            .iter()
            .map(|w| {
                let (ids, target) = w.split_at(w.len() - 1);
                -log_softmax(&self.forward(ids, None).logits)[target[0]]
            })
            .sum();
        total / windows.len().max(1) as f64
    }

    fn draw_masks(&self, steps: usize, rng: &mut ChaCha8Rng) -> Option<Masks> {
        let p = self.config.dropout_rate;
        if p == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        let mut mask = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                .collect()
        };
        let layer1 = (0..steps).map(|_| mask(self.layout.h)).collect();
        let layer2 = mask(self.layout.h);
        Some(Masks { layer1, layer2 })
    }

    /// Next-token logits for a context, in eval mode. An empty context is
    /// treated as a lone end-of-sequence token.
    pub fn logits(&self, context: &[usize]) -> Result<Vec<f64>, NeuralError> {
        self.check_ids(context)?;
        let ids: Vec<usize> = if context.is_empty() {
            vec![EOS_ID]
        } else {
            context.to_vec()
        };
        Ok(self.forward(&ids, None).logits)
    }

    pub fn next_probabilities(&self, context: &[usize]) -> Result<Vec<f64>, NeuralError> {
        Ok(softmax(&self.logits(context)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        fs::write(path, self.to_json()).map_err(|e| NeuralError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text = fs::read_to_string(path).map_err(|e| NeuralError::Io(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: NEURAL_FORMAT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.tokens.clone(),
            tensors: self
                .layout
                .tensors()
                .into_iter()
                .map(|(name, span, shape)| TensorDump {
                    name: name.to_string(),
                    shape,
                    data: self.params[span.range()].to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("neural model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| NeuralError::Parse(e.to_string()))?;
        let version = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != NEURAL_FORMAT_VERSION {
            return Err(NeuralError::Version(version));
        }
        let file: ModelFile = serde_json::from_value(probe).map_err(|e| NeuralError::Parse(e.to_string()))?;
        let mut model = NeuralLM::build(&file.config, Vocab::from_tokens(file.vocab))?;
        let expected = model.layout.tensors();
        if expected.len() != file.tensors.len() {
            return Err(NeuralError::Parse("wrong number of tensors".into()));
        }
        for ((name, span, shape), dump) in expected.into_iter().zip(file.tensors) {
            if dump.name != name || dump.shape != shape || dump.data.len() != span.len {
                return Err(NeuralError::Parse(format!(
                    "tensor {} does not match {name} {shape:?}",
                    dump.name
                )));
            }
            if dump.data.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::Parse(format!("tensor {name} has non-finite values")));
            }
            model.params[span.range()].copy_from_slice(&dump.data);
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct TensorDump {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config: NeuralConfig,
    vocab: Vec<String>,
    tensors: Vec<TensorDump>,
}

fn validate_windows(model: &NeuralLM, windows: &[Vec<usize>], seq_len: usize) -> Result<(), NeuralError> {
    if windows.is_empty() {
        return Err(NeuralError::EmptySequences);
    }
    for (i, w) in windows.iter().enumerate() {
        if w.len() != seq_len + 1 {
            return Err(NeuralError::WindowLength {
                sequence: i,
                expected: seq_len + 1,
                got: w.len(),
            });
        }
        model.check_ids(w)?;
    }
    Ok(())
}

/// Trains with the hyperparameters in `config` (dimensions come from the
/// model). Returns the mean training loss of each epoch.
pub fn train(model: &mut NeuralLM, windows: &[Vec<usize>], config: &NeuralConfig) -> Result<Vec<f64>, NeuralError> {
    config.validate()?;
    validate_windows(model, windows, config.sequence_length)?;
    model.config.dropout_rate = config.dropout_rate;
    model.set_mode(Mode::Train);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut losses = vec![0.0; windows.len()];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; model.layout.total];
            for &wi in batch {
                let w = &windows[wi];
                let (ids, target) = w.split_at(w.len() - 1);
                let masks = model.draw_masks(ids.len(), &mut rng);
                losses[wi] = model.loss_and_backward(ids, target[0], masks, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                model.set_mode(Mode::Eval);
                return Err(NeuralError::NonFiniteLoss { epoch });
            }
            let clip = if norm > CLIP_NORM { CLIP_NORM / norm } else { 1.0 };
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * clip * g;
            }
        }
        // summed in window order so the value does not depend on the shuffle
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        if !mean.is_finite() {
            model.set_mode(Mode::Eval);
            return Err(NeuralError::NonFiniteLoss { epoch });
        }
        history.push(mean);
    }
    model.set_mode(Mode::Eval);
    Ok(history)
}

/// Relative error with the denominator floored at 1e-12.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    pub coordinates: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-4,
            coordinates: 200,
            seed: 0,
        }
    }
}

/// Compares the analytic gradient of the mean batch loss against central
/// differences on randomly chosen parameters, without dropout. Returns the
/// largest relative error.
pub fn grad_check(model: &NeuralLM, windows: &[Vec<usize>], opts: GradCheckOptions) -> f64 {
    grad_check_with(model, windows, opts, |_| {})
}

/// As [`grad_check`], but lets the caller tamper with the analytic gradient
/// first.
pub fn grad_check_with(
    model: &NeuralLM,
    windows: &[Vec<usize>],
    opts: GradCheckOptions,
    tamper: impl FnOnce(&mut [f64]),
) -> f64 {
    let (_, mut analytic) = model.batch_loss_and_grad(windows);
    tamper(&mut analytic);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let total = model.layout.total;
    let mut coords: Vec<usize> = (0..total).collect();
    coords.shuffle(&mut rng);
    coords.truncate(opts.coordinates.min(total));
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for &j in &coords {
        let orig = probe.params[j];
        probe.params[j] = orig + opts.epsilon;
        let plus = probe.batch_loss(windows);
        probe.params[j] = orig - opts.epsilon;
        let minus = probe.batch_loss(windows);
        probe.params[j] = orig;
        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        worst = worst.max(relative_error(analytic[j], numeric));
    }
    worst
}

/// A block of tokens repeated back to back at the end of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailingCycle {
    pub period: usize,
    pub repeats: usize,
    /// period * repeats
    pub span: usize,
}

/// Longest trailing run of a block repeated at least twice. Among equal
/// spans the shortest period wins.
pub fn trailing_cycle<T: PartialEq>(tokens: &[T]) -> Option<TrailingCycle> {
    let n = tokens.len();
    let mut best: Option<TrailingCycle> = None;
    for period in 1..=n / 2 {
        let block = &tokens[n - period..];
        let mut repeats = 1;
        while (repeats + 1) * period <= n {
            let start = n - (repeats + 1) * period;
            if &tokens[start..start + period] != block {
                break;
            }
            repeats += 1;
        }
        if repeats >= 2 {
            let span = period * repeats;
            if best.is_none_or(|b| span > b.span) {
                best = Some(TrailingCycle { period, repeats, span });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    /// Seed followed by the generated tokens; the end token is not included.
    pub tokens: Vec<String>,
    pub generated: usize,
    pub stopped_at_eos: bool,
    pub trailing_cycle: Option<TrailingCycle>,
}

/// Greedy decoding when `temperature` is 0, otherwise sampling from the
/// tempered softmax. The context fed to the model is the last
/// `sequence_length` tokens.
pub fn generate(model: &NeuralLM, seed: &[String], max_tokens: usize, rng_seed: u64, temperature: f64) -> Generation {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut ids = model.vocab.encode(seed);
    let mut tokens = seed.to_vec();
    let window = model.config.sequence_length;
    let mut stopped_at_eos = false;
    let mut generated = 0;
    for _ in 0..max_tokens {
        let ctx = &ids[ids.len().saturating_sub(window)..];
        let logits = model.logits(ctx).expect("ids come from the vocabulary");
        let next = if temperature <= 0.0 {
            let mut best = 0;
            for (i, &l) in logits.iter().enumerate() {
                if l > logits[best] {
                    best = i;
                }
            }
            best
        } else {
            let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
            let probs = softmax(&scaled);
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if r < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        if next == EOS_ID {
            stopped_at_eos = true;
            break;
        }
        ids.push(next);
        tokens.push(model.vocab.token(next).to_string());
        generated += 1;
    }
    let trailing_cycle = trailing_cycle(&tokens);
    Generation {
        tokens,
        generated,
        stopped_at_eos,
        trailing_cycle,
    }
}

/// Loss history as `epoch,loss` CSV, epochs counted from 1.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    out
}
