//! Filling template masks, and the end-to-end template + infill generator.
//!
//! Infillers resolve masks left to right; each fill is visible to the next.
//! Every mask forbids its original surface so a filled template always
//! differs from the joke it came from.
//!
//! The remote infiller speaks JSON over HTTP:
//!
//! ```text
//! POST <endpoint>/infill
//! {"tokens":[...],"mask_positions":[...],"top_k":K,"forbid":{"<pos>":[...]}}
//! -> {"candidates":{"<pos>":[{"token":"...","score":0.0}, ...]}}
//! ```
//!
//! with candidates in descending score order.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotatedJoke, Upos};
use crate::lexicons::LexiconSet;
use crate::template::{
    extract_template, join_with_spacing, Template, TemplateError, WeightConfig, DEFAULT_PLACEHOLDER,
};

pub const MASK_SENTINEL: &str = "[MASK]";
pub const DEFAULT_TOP_K: usize = 5;
pub const MLM_URL_ENV: &str = "HUMOR_MLM_URL";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum InfillError {
    #[error("infill vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid infill request: {0}")]
    InvalidRequest(String),
    #[error("no allowed candidate for mask {mask_index} (position {position})")]
    NoCandidates { mask_index: usize, position: usize },
    #[error("{endpoint}: mask {mask_index}: {message}")]
    Remote {
        endpoint: String,
        mask_index: usize,
        message: String,
    },
    #[error("{endpoint}: mask {mask_index}: protocol violation: {message}")]
    Protocol {
        endpoint: String,
        mask_index: usize,
        message: String,
    },
    #[error("no infill endpoint given and {MLM_URL_ENV} is not set")]
    NoEndpoint,
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(token: impl Into<String>, score: f64) -> Self {
        Candidate {
            token: token.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillRequest {
    pub tokens: Vec<String>,
    pub mask_positions: Vec<usize>,
    pub top_k: usize,
    /// Keyed by mask position.
    pub forbid: BTreeMap<usize, Vec<String>>,
    /// POS of the original token at each mask; local infillers only.
    #[serde(skip)]
    pub pos_hints: BTreeMap<usize, Upos>,
}

impl InfillRequest {
    /// Lowercased template tokens with the sentinel at each mask. Each mask
    /// forbids its original surface.
    pub fn from_template(template: &Template, top_k: usize) -> Self {
        let mut tokens = Vec::with_capacity(template.tokens.len());
        let mut mask_positions = Vec::new();
        let mut forbid = BTreeMap::new();
        let mut pos_hints = BTreeMap::new();
        for (i, t) in template.tokens.iter().enumerate() {
            if t.masked {
                tokens.push(MASK_SENTINEL.to_string());
                mask_positions.push(i);
                forbid.insert(i, vec![t.surface.to_lowercase()]);
                pos_hints.insert(i, t.upos);
            } else {
                tokens.push(t.surface.to_lowercase());
            }
        }
        InfillRequest {
            tokens,
            mask_positions,
            top_k,
            forbid,
            pos_hints,
        }
    }

    pub fn validate(&self) -> Result<(), InfillError> {
        if self.top_k == 0 {
            return Err(InfillError::InvalidRequest("top_k must be at least 1".into()));
        }
        let sentinels: Vec<usize> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| *t == MASK_SENTINEL)
            .map(|(i, _)| i)
            .collect();
        if sentinels != self.mask_positions {
            return Err(InfillError::InvalidRequest(format!(
                "mask positions {:?} do not match sentinel positions {:?}",
                self.mask_positions, sentinels
            )));
        }
        Ok(())
    }

    fn is_forbidden(&self, position: usize, token: &str) -> bool {
        token == MASK_SENTINEL
            || self
                .forbid
                .get(&position)
                .is_some_and(|f| f.iter().any(|x| x.to_lowercase() == token.to_lowercase()))
    }

    /// The request as sent on the wire.
    pub fn to_wire_json(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillResponse {
    pub candidates: BTreeMap<usize, Vec<Candidate>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfillResult {
    pub filled_tokens: Vec<String>,
    pub candidates: BTreeMap<usize, Vec<Candidate>>,
    pub infiller_id: String,
}

pub trait Infiller {
    fn id(&self) -> String;

    fn infill(&self, request: &InfillRequest, seed: u64) -> Result<InfillResult, InfillError>;
}

/// First candidate, in list order, that the request allows at `position`.
fn best_allowed(req: &InfillRequest, position: usize, candidates: &[Candidate]) -> Option<String> {
    candidates
        .iter()
        .find(|c| !req.is_forbidden(position, &c.token))
        .map(|c| c.token.clone())
}

/// Samples fills from corpus words sharing the original token's POS,
/// weighted by corpus frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineInfiller {
    by_pos: BTreeMap<Upos, BTreeMap<String, u64>>,
    all: BTreeMap<String, u64>,
}

impl BaselineInfiller {
    /// Counts lowercased word tokens of the annotated corpus by UPOS.
    pub fn from_docs(docs: &[AnnotatedJoke]) -> Result<Self, InfillError> {
        let mut entries = Vec::new();
        for d in docs {
            for t in d.tokens() {
                if t.is_word() {
                    entries.push((t.surface.to_lowercase(), t.upos, 1));
                }
            }
        }
        Self::from_counts(entries)
    }

    pub fn from_counts(entries: impl IntoIterator<Item = (String, Upos, u64)>) -> Result<Self, InfillError> {
        let mut by_pos: BTreeMap<Upos, BTreeMap<String, u64>> = BTreeMap::new();
        let mut all: BTreeMap<String, u64> = BTreeMap::new();
        for (word, pos, count) in entries {
            if count == 0 || word.is_empty() || word == MASK_SENTINEL {
                continue;
            }
            *by_pos.entry(pos).or_default().entry(word.clone()).or_insert(0) += count;
            *all.entry(word).or_insert(0) += count;
        }
        if all.is_empty() {
            return Err(InfillError::EmptyVocabulary);
        }
        Ok(BaselineInfiller { by_pos, all })
    }

    fn pool<'a>(&'a self, req: &InfillRequest, position: usize) -> Vec<(&'a String, u64)> {
        fn allowed<'m>(m: &'m BTreeMap<String, u64>, req: &InfillRequest, position: usize) -> Vec<(&'m String, u64)> {
            m.iter()
                .filter(|(w, _)| !req.is_forbidden(position, w))
                .map(|(w, &c)| (w, c))
                .collect()
        }
        let same_pos = req
            .pos_hints
            .get(&position)
            .and_then(|p| self.by_pos.get(p))
            .map(|m| allowed(m, req, position))
            .unwrap_or_default();
        if same_pos.is_empty() {
            allowed(&self.all, req, position)
        } else {
            same_pos
        }
    }
}

impl Infiller for BaselineInfiller {
    fn id(&self) -> String {
        "baseline".to_string()
    }

    fn infill(&self, req: &InfillRequest, seed: u64) -> Result<InfillResult, InfillError> {
        req.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut filled = req.tokens.clone();
        let mut candidates = BTreeMap::new();
        for (mask_index, &p) in req.mask_positions.iter().enumerate() {
            let pool = self.pool(req, p);
            let total: u64 = pool.iter().map(|(_, c)| c).sum();
            if total == 0 {
                return Err(InfillError::NoCandidates {
                    mask_index,
                    position: p,
                });
            }
            let mut r = rng.gen_range(0..total);
            let mut choice = pool[pool.len() - 1].0;
            for &(w, c) in &pool {
                if r < c {
                    choice = w;
                    break;
                }
                r -= c;
            }
            filled[p] = choice.clone();
            let mut ranked = pool.clone();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            candidates.insert(
                p,
                ranked
                    .into_iter()
                    .take(req.top_k)
                    .map(|(w, c)| Candidate::new(w.clone(), c as f64 / total as f64))
                    .collect(),
            );
        }
        Ok(InfillResult {
            filled_tokens: filled,
            candidates,
            infiller_id: self.id(),
        })
    }
}

/// Answers the i-th mask from the i-th fixed candidate list, taking the first
/// allowed entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedInfiller {
    id: String,
    script: Vec<Vec<Candidate>>,
}

impl ScriptedInfiller {
    pub fn new(id: impl Into<String>, script: Vec<Vec<Candidate>>) -> Self {
        ScriptedInfiller { id: id.into(), script }
    }

    /// One single-candidate list per word.
    pub fn from_words(id: impl Into<String>, words: &[&str]) -> Self {
        Self::new(id, words.iter().map(|w| vec![Candidate::new(*w, 1.0)]).collect())
    }
}

impl Infiller for ScriptedInfiller {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn infill(&self, req: &InfillRequest, _seed: u64) -> Result<InfillResult, InfillError> {
        req.validate()?;
        let mut filled = req.tokens.clone();
        let mut candidates = BTreeMap::new();
        for (mask_index, &p) in req.mask_positions.iter().enumerate() {
            let list = self.script.get(mask_index).cloned().unwrap_or_default();
            let choice = best_allowed(req, p, &list).ok_or(InfillError::NoCandidates {
                mask_index,
                position: p,
            })?;
            filled[p] = choice;
            candidates.insert(p, list.into_iter().take(req.top_k).collect());
        }
        Ok(InfillResult {
            filled_tokens: filled,
            candidates,
            infiller_id: self.id.clone(),
        })
    }
}

/// Client for a masked-LM service. One round trip per mask: each request
/// carries the fills made so far and only the first remaining mask's
/// candidates are used.
#[derive(Debug, Clone)]
pub struct RemoteInfiller {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteInfiller {
    /// `base` is the service root; `/infill` is appended unless present.
    pub fn new(base: &str, timeout: Duration) -> Self {
        let trimmed = base.trim_end_matches('/');
        let endpoint = if trimmed.ends_with("/infill") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/infill")
        };
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        RemoteInfiller {
            endpoint,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// Uses `url` if given, else the `HUMOR_MLM_URL` environment variable.
    pub fn from_env_or(url: Option<&str>, timeout: Duration) -> Result<Self, InfillError> {
        match url {
            Some(u) => Ok(Self::new(u, timeout)),
            None => std::env::var(MLM_URL_ENV)
                .map(|u| Self::new(&u, timeout))
                .map_err(|_| InfillError::NoEndpoint),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn round_trip(&self, req: &InfillRequest, mask_index: usize) -> Result<InfillResponse, InfillError> {
        let remote = |message: String| InfillError::Remote {
            endpoint: self.endpoint.clone(),
            mask_index,
            message,
        };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json")
            .send(req.to_wire_json())
            .map_err(|e| remote(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| remote(e.to_string()))?;
        if status != 200 {
            return Err(remote(format!("HTTP {status}: {}", body.trim())));
        }
        serde_json::from_str(&body).map_err(|e| InfillError::Protocol {
            endpoint: self.endpoint.clone(),
            mask_index,
            message: format!("malformed response: {e}"),
        })
    }
}

/// Checks one mask's candidate list: non-empty, at most `top_k` entries,
/// non-empty sentinel-free tokens, finite non-increasing scores.
pub fn validate_candidates(list: &[Candidate], top_k: usize) -> Result<(), String> {
    if list.is_empty() {
        return Err("empty candidate list".into());
    }
    if list.len() > top_k {
        return Err(format!("{} candidates for top_k {top_k}", list.len()));
    }
    for c in list {
        if c.token.is_empty() || c.token.contains(MASK_SENTINEL) {
            return Err(format!("invalid candidate token {:?}", c.token));
        }
        if !c.score.is_finite() {
            return Err(format!("non-finite score for {:?}", c.token));
        }
    }
    if list.windows(2).any(|w| w[1].score > w[0].score) {
        return Err("scores are not in descending order".into());
    }
    Ok(())
}

impl Infiller for RemoteInfiller {
    fn id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn infill(&self, req: &InfillRequest, _seed: u64) -> Result<InfillResult, InfillError> {
        req.validate()?;
        let mut current = req.clone();
        let mut candidates = BTreeMap::new();
        for (mask_index, &p) in req.mask_positions.iter().enumerate() {
            let protocol = |message: String| InfillError::Protocol {
                endpoint: self.endpoint.clone(),
                mask_index,
                message,
            };
            let resp = self.round_trip(&current, mask_index)?;
            let list = resp
                .candidates
                .get(&p)
                .ok_or_else(|| protocol(format!("no candidates for position {p}")))?;
            validate_candidates(list, req.top_k).map_err(protocol)?;
            let choice = best_allowed(req, p, list).ok_or(InfillError::NoCandidates {
                mask_index,
                position: p,
            })?;
            current.tokens[p] = choice;
            current.mask_positions.remove(0);
            current.forbid.remove(&p);
            candidates.insert(p, list.clone());
        }
        Ok(InfillResult {
            filled_tokens: current.tokens,
            candidates,
            infiller_id: self.id(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridDiagnostics {
    pub mask_count: usize,
    pub mask_scores: Vec<f64>,
    pub infiller_id: String,
    /// No mask was filled, so the output is the lowercased original.
    pub no_op: bool,
    pub no_candidates: bool,
    pub approximate_annotation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridOutput {
    pub joke_id: String,
    pub original: String,
    pub template: String,
    pub generated: String,
    pub diagnostics: HybridDiagnostics,
}

/// Extracts a template, fills it and renders the result.
pub fn hybrid_generate(
    doc: &AnnotatedJoke,
    lex: &LexiconSet,
    cfg: &WeightConfig,
    infiller: &dyn Infiller,
    seed: u64,
    top_k: usize,
) -> Result<HybridOutput, InfillError> {
    let template = extract_template(doc, lex, cfg)?;
    let request = InfillRequest::from_template(&template, top_k);
    let result = if request.mask_positions.is_empty() {
        InfillResult {
            filled_tokens: request.tokens.clone(),
            candidates: BTreeMap::new(),
            infiller_id: infiller.id(),
        }
    } else {
        infiller.infill(&request, seed)?
    };
    if result.filled_tokens.len() != template.tokens.len() || result.filled_tokens.iter().any(|t| t == MASK_SENTINEL) {
        return Err(InfillError::InvalidRequest(
            "infiller returned an incomplete fill".into(),
        ));
    }
    let parts: Vec<(String, bool)> = result
        .filled_tokens
        .iter()
        .zip(&template.tokens)
        .map(|(f, t)| (f.clone(), t.space_after))
        .collect();
    let mask_scores = template
        .tokens
        .iter()
        .filter(|t| t.masked)
        .map(|t| t.score.unwrap_or(0.0))
        .collect();
    Ok(HybridOutput {
        joke_id: doc.joke.id.clone(),
        original: doc.joke.text.clone(),
        template: template.render(DEFAULT_PLACEHOLDER),
        generated: join_with_spacing(&parts),
        diagnostics: HybridDiagnostics {
            mask_count: template.mask_count(),
            mask_scores,
            infiller_id: result.infiller_id,
            no_op: template.mask_count() == 0,
            no_candidates: template.no_candidates,
            approximate_annotation: doc.source.approximate(),
        },
    })
}
