//! Order-(n-1) Markov chain language models over word or character tokens.
//!
//! Each training sequence is padded with n-1 [`BOS`] tokens and one [`EOS`].
//! Text tokens that collide with a boundary token, or that start with a
//! backslash, are stored with a leading backslash so boundaries stay
//! unambiguous; generation undoes the escaping.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Level, TokenSeq};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const MARKOV_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("gram size must be at least 2, got {0}")]
    GramTooSmall(usize),
    #[error("cannot fit a model on an empty corpus")]
    EmptyCorpus,
    #[error("sequence {index} is {found}-level but the model is {expected}-level")]
    LevelMismatch {
        index: usize,
        expected: Level,
        found: Level,
    },
    #[error("context has {got} tokens, expected {expected}")]
    ContextLength { expected: usize, got: usize },
    #[error("max_tokens must be at least 1")]
    ZeroMaxTokens,
    #[error("model file: {0}")]
    Io(String),
    #[error("model file is not valid: {0}")]
    Parse(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
}

pub fn escape(token: &str) -> String {
    if token == BOS || token == EOS || token.starts_with('\\') {
        format!("\\{token}")
    } else {
        token.to_string()
    }
}

pub fn unescape(token: &str) -> String {
    token.strip_prefix('\\').unwrap_or(token).to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    level: Level,
    n: usize,
    counts: BTreeMap<Vec<String>, BTreeMap<String, u64>>,
    /// Escaped text tokens seen in training (boundaries excluded).
    vocab: BTreeSet<String>,
}

impl NGramModel {
    pub fn empty(level: Level, n: usize) -> Result<Self, MarkovError> {
        if n < 2 {
            return Err(MarkovError::GramTooSmall(n));
        }
        Ok(NGramModel {
            level,
            n,
            counts: BTreeMap::new(),
            vocab: BTreeSet::new(),
        })
    }

    pub fn fit(corpus: &[TokenSeq], level: Level, n: usize) -> Result<Self, MarkovError> {
        let mut model = Self::empty(level, n)?;
        if corpus.is_empty() {
            return Err(MarkovError::EmptyCorpus);
        }
        for (index, seq) in corpus.iter().enumerate() {
            if seq.level != level {
                return Err(MarkovError::LevelMismatch {
                    index,
                    expected: level,
                    found: seq.level,
                });
            }
            model.add_sequence(&seq.tokens);
        }
        Ok(model)
    }

    fn add_sequence(&mut self, tokens: &[String]) {
        let mut padded: Vec<String> = vec![BOS.to_string(); self.n - 1];
        for t in tokens {
            let e = escape(t);
            self.vocab.insert(e.clone());
            padded.push(e);
        }
        padded.push(EOS.to_string());
        for w in padded.windows(self.n) {
            let (ctx, next) = w.split_at(self.n - 1);
            *self
                .counts
                .entry(ctx.to_vec())
                .or_default()
                .entry(next[0].clone())
                .or_insert(0) += 1;
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// Contexts and successor counts, in escaped form.
    pub fn counts(&self) -> &BTreeMap<Vec<String>, BTreeMap<String, u64>> {
        &self.counts
    }

    /// Successor probabilities for an escaped context of length n-1; empty
    /// when the context was never seen.
    pub fn next_distribution(&self, context: &[String]) -> Result<BTreeMap<String, f64>, MarkovError> {
        if context.len() != self.n - 1 {
            return Err(MarkovError::ContextLength {
                expected: self.n - 1,
                got: context.len(),
            });
        }
        Ok(self
            .counts
            .get(context)
            .map(|succ| {
                let total: u64 = succ.values().sum();
                succ.iter()
                    .map(|(t, &c)| (t.clone(), c as f64 / total as f64))
                    .collect()
            })
            .unwrap_or_default())
    }

    /// Successor counts pooled over every stored context ending in `suffix`.
    fn backoff_counts(&self, suffix: &[String]) -> BTreeMap<String, u64> {
        let mut pooled = BTreeMap::new();
        for (ctx, succ) in &self.counts {
            if ctx.ends_with(suffix) {
                for (t, c) in succ {
                    *pooled.entry(t.clone()).or_insert(0) += c;
                }
            }
        }
        pooled
    }

    /// Extends the unescaped `seed` until EOS or `max_tokens` new tokens.
    /// Returns the seed followed by the generated tokens.
    pub fn generate(
        &self,
        seed: &[String],
        max_tokens: usize,
        rng_seed: u64,
        backoff: bool,
    ) -> Result<Vec<String>, MarkovError> {
        if max_tokens == 0 {
            return Err(MarkovError::ZeroMaxTokens);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let k = self.n - 1;
        let mut history: Vec<String> = vec![BOS.to_string(); k];
        history.extend(seed.iter().map(|t| escape(t)));
        let mut out: Vec<String> = seed.to_vec();
        for _ in 0..max_tokens {
            let ctx = &history[history.len() - k..];
            let next = match self.counts.get(ctx) {
                Some(succ) => sample_counts(succ, &mut rng),
                None if backoff => self.sample_backoff(ctx, &mut rng),
                None => None,
            };
            match next {
                Some(t) if t != EOS => {
                    out.push(unescape(&t));
                    history.push(t);
                }
                _ => break,
            }
        }
        Ok(out)
    }

    fn sample_backoff(&self, ctx: &[String], rng: &mut ChaCha8Rng) -> Option<String> {
        for len in (1..ctx.len()).rev() {
            let pooled = self.backoff_counts(&ctx[ctx.len() - len..]);
            if !pooled.is_empty() {
                return sample_counts(&pooled, rng);
            }
        }
        let mut choices: Vec<&String> = self.vocab.iter().collect();
        let eos = EOS.to_string();
        choices.push(&eos);
        Some(choices[rng.gen_range(0..choices.len())].clone())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MARKOV_FORMAT_VERSION,
            level: self.level,
            n: self.n,
            contexts: self
                .counts
                .iter()
                .map(|(ctx, succ)| ContextEntry {
                    ctx: ctx.clone(),
                    succ: succ.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("markov model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MarkovError> {
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| MarkovError::Parse(e.to_string()))?;
        let version = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MARKOV_FORMAT_VERSION {
            return Err(MarkovError::Version(version));
        }
        let file: ModelFile = serde_json::from_value(probe).map_err(|e| MarkovError::Parse(e.to_string()))?;
        let mut model = Self::empty(file.level, file.n)?;
        for entry in file.contexts {
            if entry.ctx.len() != file.n - 1 {
                return Err(MarkovError::Parse(format!(
                    "context {:?} has the wrong length",
                    entry.ctx
                )));
            }
            if entry.succ.is_empty() || entry.succ.values().any(|&c| c == 0) {
                return Err(MarkovError::Parse(format!(
                    "context {:?} has an empty or zero count",
                    entry.ctx
                )));
            }
            for t in entry.ctx.iter().chain(entry.succ.keys()) {
                if t != BOS && t != EOS {
                    model.vocab.insert(t.clone());
                }
            }
            model.counts.insert(entry.ctx, entry.succ);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), MarkovError> {
        fs::write(path, self.to_json()).map_err(|e| MarkovError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, MarkovError> {
        let text = fs::read_to_string(path).map_err(|e| MarkovError::Io(e.to_string()))?;
        Self::from_json(&text)
    }
}

/// Draws a successor proportionally to its count, walking successors in
/// lexicographic order.
fn sample_counts(succ: &BTreeMap<String, u64>, rng: &mut ChaCha8Rng) -> Option<String> {
    let total: u64 = succ.values().sum();
    if total == 0 {
        return None;
    }
    let mut r = rng.gen_range(0..total);
    for (t, &c) in succ {
        if r < c {
            return Some(t.clone());
        }
        r -= c;
    }
    None
}

#[derive(Serialize, Deserialize)]
struct ContextEntry {
    ctx: Vec<String>,
    succ: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    level: Level,
    n: usize,
    contexts: Vec<ContextEntry>,
}

/// All length-`k` windows of `tokens`.
pub fn windows(tokens: &[String], k: usize) -> Vec<Vec<String>> {
    if k == 0 {
        return Vec::new();
    }
    tokens.windows(k).map(<[String]>::to_vec).collect()
}

pub fn training_windows(corpus: &[TokenSeq], k: usize) -> HashSet<Vec<String>> {
    corpus.iter().flat_map(|s| windows(&s.tokens, k)).collect()
}

/// Share of the output's length-`k` windows that occur in `known`; `None`
/// when the output is shorter than `k`.
pub fn verbatim_fraction(output: &[String], known: &HashSet<Vec<String>>, k: usize) -> Option<f64> {
    let w = windows(output, k);
    if w.is_empty() {
        return None;
    }
    let hits = w.iter().filter(|x| known.contains(*x)).count();
    Some(hits as f64 / w.len() as f64)
}
