//! Punchline templates: score each token's importance from its grammatical
//! role and word frequency, then mask the least important ones.
//!
//! ```text
//! score = weight(category) * log10(R - rank + 1) * scale
//! ```
//!
//! `rank` is the token's 1-based position in the frequency list and `R` the
//! list length, so frequent words score high and out-of-vocabulary words
//! score exactly 0. Low scores are masked first.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotatedJoke, AnnotatedToken, AnnotationSource, Sentence, Upos};
use crate::lexicons::LexiconSet;

pub const DEFAULT_PLACEHOLDER: &str = "[MASK]";
pub const DEFAULT_SCALE: f64 = 2.5;
pub const DEFAULT_MASK_COUNT: usize = 3;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("no weight configured for category {0}")]
    UnknownCategory(DepCategory),
    #[error("rank {rank} outside [1, {max_rank}]")]
    RankOutOfRange { rank: usize, max_rank: usize },
    #[error("invalid weight configuration: {0}")]
    InvalidConfig(String),
}

/// Grammatical categories that make a token a mask candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepCategory {
    NamedEntity,
    Nsubj,
    Iobj,
    Dobj,
    AdjPredicative,
    Verb,
}

impl DepCategory {
    pub const ALL: [DepCategory; 6] = [
        DepCategory::NamedEntity,
        DepCategory::Nsubj,
        DepCategory::Iobj,
        DepCategory::Dobj,
        DepCategory::AdjPredicative,
        DepCategory::Verb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DepCategory::NamedEntity => "named_entity",
            DepCategory::Nsubj => "nsubj",
            DepCategory::Iobj => "iobj",
            DepCategory::Dobj => "dobj",
            DepCategory::AdjPredicative => "adj_predicative",
            DepCategory::Verb => "verb",
        }
    }

    pub fn default_weight(self) -> f64 {
        match self {
            DepCategory::NamedEntity => 10.0,
            DepCategory::Nsubj => 5.0,
            DepCategory::Iobj => 4.0,
            DepCategory::Dobj => 3.0,
            DepCategory::AdjPredicative => 2.0,
            DepCategory::Verb => 1.0,
        }
    }
}

impl fmt::Display for DepCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStrategy {
    /// Mask the k lowest-scoring candidates.
    Count(usize),
    /// Mask ceil(rho * m) of the m candidates.
    Fraction(f64),
    /// Mask every candidate scoring at most tau.
    Threshold(f64),
}

impl Default for MaskStrategy {
    fn default() -> Self {
        MaskStrategy::Count(DEFAULT_MASK_COUNT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightConfig {
    pub dep_weights: BTreeMap<DepCategory, f64>,
    pub scale: f64,
    pub mask_strategy: MaskStrategy,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            dep_weights: DepCategory::ALL.iter().map(|&c| (c, c.default_weight())).collect(),
            scale: DEFAULT_SCALE,
            mask_strategy: MaskStrategy::default(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightOverrides {
    #[serde(default)]
    dep_weights: BTreeMap<DepCategory, f64>,
    scale: Option<f64>,
    mask_strategy: Option<MaskStrategy>,
}

impl WeightConfig {
    /// Defaults with any values present in `json` replaced.
    pub fn from_json_overrides(json: &str) -> Result<Self, TemplateError> {
        let o: WeightOverrides = serde_json::from_str(json).map_err(|e| TemplateError::InvalidConfig(e.to_string()))?;
        let mut cfg = WeightConfig::default();
        cfg.dep_weights.extend(o.dep_weights);
        if let Some(s) = o.scale {
            cfg.scale = s;
        }
        if let Some(m) = o.mask_strategy {
            cfg.mask_strategy = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        if let Some((c, w)) = self.dep_weights.iter().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(TemplateError::InvalidConfig(format!(
                "weight for {c} must be positive, got {w}"
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(TemplateError::InvalidConfig(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        match self.mask_strategy {
            MaskStrategy::Fraction(r) if !(0.0..=1.0).contains(&r) => Err(TemplateError::InvalidConfig(format!(
                "mask fraction {r} outside [0, 1]"
            ))),
            MaskStrategy::Threshold(t) if t.is_nan() => {
                Err(TemplateError::InvalidConfig("mask threshold is NaN".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn weight(&self, category: DepCategory) -> Result<f64, TemplateError> {
        self.dep_weights
            .get(&category)
            .copied()
            .ok_or(TemplateError::UnknownCategory(category))
    }
}

/// R - rank + 1, in [1, R].
pub fn frequency_transform(rank: usize, max_rank: usize) -> f64 {
    (max_rank - rank + 1) as f64
}

pub fn score_token(
    category: DepCategory,
    rank: usize,
    max_rank: usize,
    cfg: &WeightConfig,
) -> Result<f64, TemplateError> {
    if rank == 0 || rank > max_rank {
        return Err(TemplateError::RankOutOfRange { rank, max_rank });
    }
    let w = cfg.weight(category)?;
    Ok(w * frequency_transform(rank, max_rank).log10() * cfg.scale)
}

/// Why a token may be masked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskReason {
    NamedEntity,
    Nsubj,
    Iobj,
    Dobj,
    AdjPredicative,
    Verb,
    /// Adjective modifying a noun; always masked.
    AmodAdjective,
}

impl From<DepCategory> for MaskReason {
    fn from(c: DepCategory) -> Self {
        match c {
            DepCategory::NamedEntity => MaskReason::NamedEntity,
            DepCategory::Nsubj => MaskReason::Nsubj,
            DepCategory::Iobj => MaskReason::Iobj,
            DepCategory::Dobj => MaskReason::Dobj,
            DepCategory::AdjPredicative => MaskReason::AdjPredicative,
            DepCategory::Verb => MaskReason::Verb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidacy {
    /// Never masked.
    Fixed,
    /// Competes for a mask by score.
    Scored(DepCategory),
    /// Adjective attached to a noun: masked unconditionally.
    Forced,
}

fn base_relation(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

/// Maps a token to its mask candidacy. Determiners and punctuation are never
/// candidates; the entity flag outranks the dependency relation.
pub fn candidacy(token: &AnnotatedToken, sentence: &Sentence) -> Candidacy {
    if matches!(token.upos, Upos::DET | Upos::PUNCT) || !token.is_word() {
        return Candidacy::Fixed;
    }
    if token.is_entity {
        return Candidacy::Scored(DepCategory::NamedEntity);
    }
    let rel = base_relation(&token.deprel);
    if token.upos == Upos::ADJ {
        let head_is_noun = sentence
            .head_of(token)
            .is_some_and(|h| matches!(h.upos, Upos::NOUN | Upos::PROPN));
        return if rel == "amod" && head_is_noun {
            Candidacy::Forced
        } else {
            Candidacy::Scored(DepCategory::AdjPredicative)
        };
    }
    match rel {
        "nsubj" | "nsubjpass" | "csubj" | "csubjpass" => Candidacy::Scored(DepCategory::Nsubj),
        "iobj" | "dative" | "obl" | "pobj" => Candidacy::Scored(DepCategory::Iobj),
        "obj" | "dobj" => Candidacy::Scored(DepCategory::Dobj),
        _ if token.upos == Upos::VERB => Candidacy::Scored(DepCategory::Verb),
        _ => Candidacy::Fixed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateToken {
    pub surface: String,
    pub masked: bool,
    /// Present exactly on maskable tokens.
    pub score: Option<f64>,
    pub reason: Option<MaskReason>,
    pub upos: Upos,
    #[serde(default = "default_true")]
    pub space_after: bool,
}

fn default_true() -> bool {
    true
}

impl TemplateToken {
    pub fn maskable(&self) -> bool {
        self.reason.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub joke_id: String,
    pub tokens: Vec<TemplateToken>,
    /// Set when no token competed for a mask by score.
    #[serde(default)]
    pub no_candidates: bool,
    #[serde(default = "default_source")]
    pub source: AnnotationSource,
}

fn default_source() -> AnnotationSource {
    AnnotationSource::Conllu
}

impl Template {
    pub fn mask_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.masked)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn mask_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.masked).count()
    }

    /// Lowercased surfaces with masked tokens replaced by `placeholder`.
    pub fn render(&self, placeholder: &str) -> String {
        let parts: Vec<(String, bool)> = self
            .tokens
            .iter()
            .map(|t| {
                let text = if t.masked {
                    placeholder.to_string()
                } else {
                    t.surface.to_lowercase()
                };
                (text, t.space_after)
            })
            .collect();
        join_with_spacing(&parts)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("template serializes")
    }
}

pub fn render(template: &Template, placeholder: &str) -> String {
    template.render(placeholder)
}

/// Joins tokens, adding a space after each one whose flag is set (except the last).
pub fn join_with_spacing(parts: &[(String, bool)]) -> String {
    let mut out = String::new();
    let mut pending = false;
    for (text, space_after) in parts {
        if pending {
            out.push(' ');
        }
        out.push_str(text);
        pending = *space_after;
    }
    out
}

/// Indices of `scored` (pairs of position and score) chosen by `strategy`,
/// lowest scores first, ties going to the later position.
pub fn select_masks(scored: &[(usize, f64)], strategy: MaskStrategy) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = scored.to_vec();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    let take = match strategy {
        MaskStrategy::Count(k) => k.min(order.len()),
        MaskStrategy::Fraction(r) => ((r * order.len() as f64).ceil() as usize).min(order.len()),
        MaskStrategy::Threshold(t) => order.iter().take_while(|(_, s)| *s <= t).count(),
    };
    order[..take].iter().map(|(p, _)| *p).collect()
}

pub fn extract_template(doc: &AnnotatedJoke, lex: &LexiconSet, cfg: &WeightConfig) -> Result<Template, TemplateError> {
    cfg.validate()?;
    let max_rank = lex.max_rank();
    let mut tokens = Vec::with_capacity(doc.token_count());
    let mut scored = Vec::new();
    for sentence in &doc.sentences {
        for token in &sentence.tokens {
            let position = tokens.len();
            let rank = lex.frequency_rank(&token.surface);
            let (score, reason, masked) = match candidacy(token, sentence) {
                Candidacy::Fixed => (None, None, false),
                Candidacy::Scored(cat) => {
                    let s = score_token(cat, rank, max_rank, cfg)?;
                    scored.push((position, s));
                    (Some(s), Some(cat.into()), false)
                }
                Candidacy::Forced => {
                    let s = score_token(DepCategory::AdjPredicative, rank, max_rank, cfg)?;
                    (Some(s), Some(MaskReason::AmodAdjective), true)
                }
            };
            tokens.push(TemplateToken {
                surface: token.surface.clone(),
                masked,
                score,
                reason,
                upos: token.upos,
                space_after: token.space_after,
            });
        }
    }
    for p in select_masks(&scored, cfg.mask_strategy) {
        tokens[p].masked = true;
    }
    Ok(Template {
        joke_id: doc.joke.id.clone(),
        tokens,
        no_candidates: scored.is_empty(),
        source: doc.source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{attach_conllu, parse_conllu};
    use crate::corpus::Joke;
    use proptest::prelude::*;

    fn lex(words: &[&str]) -> LexiconSet {
        let mut l = LexiconSet::default();
        l.set_frequency_list(words.iter().map(|w| w.to_string()).collect());
        l
    }

    fn doc(id: &str, conllu: &str) -> AnnotatedJoke {
        let sentences = parse_conllu(conllu.as_bytes()).unwrap();
        let text = sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.surface.clone()))
            .collect::<Vec<_>>()
            .join(" ");
        attach_conllu(&[Joke::new(id, text)], sentences).unwrap().remove(0)
    }

    const CHICKEN: &str = "\
1\tWhy\twhy\tADV\t_\t_\t5\tadvmod\t_\t_
2\tdid\tdo\tAUX\t_\t_\t5\taux\t_\t_
3\tthe\tthe\tDET\t_\t_\t4\tdet\t_\t_
4\tchicken\tchicken\tNOUN\t_\t_\t5\tnsubj\t_\t_
5\tcross\tcross\tVERB\t_\t_\t0\tROOT\t_\t_
6\tthe\tthe\tDET\t_\t_\t7\tdet\t_\t_
7\troad\troad\tNOUN\t_\t_\t5\tdobj\t_\t_
8\t?\t?\tPUNCT\t_\t_\t5\tpunct\t_\t_

";

    #[test]
    fn score_arithmetic() {
        let cfg = WeightConfig::default();
        assert_eq!(score_token(DepCategory::Nsubj, 10_000, 10_000, &cfg).unwrap(), 0.0);
        let top = score_token(DepCategory::NamedEntity, 1, 10_000, &cfg).unwrap();
        assert!((top - 100.0).abs() < 1e-9);
        let mid = score_token(DepCategory::Nsubj, 3000, 10_000, &cfg).unwrap();
        assert!((mid - 5.0 * 7001f64.log10() * 2.5).abs() < 1e-9);
        assert!((mid - 48.07).abs() < 0.01);
        assert!(matches!(
            score_token(DepCategory::Verb, 0, 10, &cfg),
            Err(TemplateError::RankOutOfRange { .. })
        ));
        let mut partial = cfg.clone();
        partial.dep_weights.remove(&DepCategory::Verb);
        assert!(matches!(
            score_token(DepCategory::Verb, 1, 10, &partial),
            Err(TemplateError::UnknownCategory(DepCategory::Verb))
        ));
    }

    #[test]
    fn chicken_subject_masked_first() {
        let d = doc("c", CHICKEN);
        let l = lex(&["the", "why", "did", "road", "cross", "of", "and"]);
        let cfg = WeightConfig {
            mask_strategy: MaskStrategy::Count(1),
            ..WeightConfig::default()
        };
        let t = extract_template(&d, &l, &cfg).unwrap();
        assert_eq!(t.render(DEFAULT_PLACEHOLDER), "why did the [MASK] cross the road ?");
        assert_eq!(t.render("<mask>"), "why did the <mask> cross the road ?");
        assert!(!t.tokens[4].masked);
    }

    #[test]
    fn no_candidates_is_flagged() {
        let conllu = "1\tOh\toh\tINTJ\t_\t_\t0\troot\t_\t_\n2\t!\t!\tPUNCT\t_\t_\t1\tpunct\t_\t_\n\n";
        let t = extract_template(&doc("x", conllu), &lex(&["oh"]), &WeightConfig::default()).unwrap();
        assert!(t.no_candidates);
        assert_eq!(t.mask_count(), 0);
        assert_eq!(t.render(DEFAULT_PLACEHOLDER), "oh !");
    }

    #[test]
    fn amod_adjectives_always_masked() {
        let conllu = "\
1\tBig\tbig\tADJ\t_\t_\t2\tamod\t_\t_
2\tdogs\tdog\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tbark\tbark\tVERB\t_\t_\t0\troot\t_\t_

";
        let l = lex(&["big", "dogs", "bark"]);
        let cfg = WeightConfig {
            mask_strategy: MaskStrategy::Count(0),
            ..WeightConfig::default()
        };
        let t = extract_template(&doc("a", conllu), &l, &cfg).unwrap();
        assert_eq!(t.render(DEFAULT_PLACEHOLDER), "[MASK] dogs bark");
        assert_eq!(t.tokens[0].reason, Some(MaskReason::AmodAdjective));
    }

    #[test]
    fn entity_flag_overrides_relation() {
        let conllu = "\
1\tBob\tBob\tPROPN\t_\t_\t2\tnsubj\t_\tNE=Yes
2\truns\trun\tVERB\t_\t_\t0\troot\t_\t_

";
        let t = extract_template(&doc("e", conllu), &lex(&["bob", "runs"]), &WeightConfig::default()).unwrap();
        assert_eq!(t.tokens[0].reason, Some(MaskReason::NamedEntity));
    }

    #[test]
    fn strategies() {
        let scored = [(0, 5.0), (1, 0.0), (2, 3.0), (3, 0.0)];
        assert_eq!(select_masks(&scored, MaskStrategy::Count(3)), vec![3, 1, 2]);
        assert_eq!(select_masks(&scored, MaskStrategy::Count(10)).len(), 4);
        assert_eq!(select_masks(&scored, MaskStrategy::Fraction(0.5)), vec![3, 1]);
        assert_eq!(select_masks(&scored, MaskStrategy::Fraction(0.3)), vec![3, 1]);
        assert_eq!(select_masks(&scored, MaskStrategy::Threshold(3.0)), vec![3, 1, 2]);
    }

    #[test]
    fn overrides_merge_with_defaults() {
        let cfg = WeightConfig::from_json_overrides(r#"{"dep_weights":{"verb":0.5},"scale":3.0}"#).unwrap();
        assert_eq!(cfg.weight(DepCategory::Verb).unwrap(), 0.5);
        assert_eq!(cfg.weight(DepCategory::Nsubj).unwrap(), 5.0);
        assert_eq!(cfg.scale, 3.0);
        assert!(WeightConfig::from_json_overrides(r#"{"scale":-1}"#).is_err());
        assert!(WeightConfig::from_json_overrides(r#"{"dep_weights":{"adverb":1}}"#).is_err());
        let cfg = WeightConfig::from_json_overrides(r#"{"mask_strategy":{"fraction":0.5}}"#).unwrap();
        assert_eq!(cfg.mask_strategy, MaskStrategy::Fraction(0.5));
    }

    #[test]
    fn template_json_round_trip() {
        let t = extract_template(&doc("c", CHICKEN), &lex(&["the", "road"]), &WeightConfig::default()).unwrap();
        let back: Template = serde_json::from_str(&t.to_json_line()).unwrap();
        assert_eq!(back, t);
        for tok in &t.tokens {
            assert!(!tok.masked || tok.maskable());
            assert_eq!(tok.score.is_some(), tok.maskable());
        }
    }

    proptest! {
        #[test]
        fn weight_monotonicity(rank in 1usize..1000, extra in 0usize..1000) {
            let cfg = WeightConfig::default();
            let max_rank = 1000 + extra;
            let scores: Vec<f64> = DepCategory::ALL
                .iter()
                .map(|&c| score_token(c, rank, max_rank, &cfg).unwrap())
                .collect();
            // categories are listed by strictly decreasing weight
            for w in scores.windows(2) {
                if rank < max_rank {
                    prop_assert!(w[0] > w[1]);
                } else {
                    prop_assert_eq!(w[0], w[1]);
                }
            }
        }

        #[test]
        fn frequency_monotonicity(a in 1usize..500, b in 1usize..500) {
            let cfg = WeightConfig::default();
            let (lo, hi) = (a.min(b), a.max(b));
            for c in DepCategory::ALL {
                prop_assert!(score_token(c, lo, 500, &cfg).unwrap() >= score_token(c, hi, 500, &cfg).unwrap());
            }
        }

        #[test]
        fn count_selection_matches_brute_force(scores in proptest::collection::vec(0u8..4, 0..10), k in 0usize..6) {
            let scored: Vec<(usize, f64)> = scores.iter().enumerate().map(|(i, &s)| (i, f64::from(s))).collect();
            let chosen: std::collections::BTreeSet<usize> = select_masks(&scored, MaskStrategy::Count(k)).into_iter().collect();
            // a candidate is chosen iff fewer than k others precede it in (score asc, position desc)
            for &(p, s) in &scored {
                let ahead = scored.iter().filter(|&&(q, t)| t < s || (t == s && q > p)).count();
                prop_assert_eq!(chosen.contains(&p), ahead < k);
            }
        }
    }
}
