//! Hand-engineered humor features: POS ratios, slang, antonym pairs,
//! discourse connectives and mean word polarity.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotatedJoke, Upos};
use crate::corpus::{self, Level, PunctMode, TokenSeq};
use crate::lexicons::LexiconSet;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("document {0:?} has no word tokens")]
    DegenerateDocument(String),
    #[error("no documents to export")]
    NoDocuments,
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

pub const FEATURE_NAMES: [&str; 11] = [
    "ratio_verb",
    "ratio_noun",
    "ratio_pron",
    "ratio_propn",
    "ratio_modifier",
    "slang_count",
    "slang_subword_count",
    "antonym_pair_count",
    "connective_count",
    "polarity_mean",
    "token_count",
];

pub const HISTOGRAM_BINS: usize = 20;
pub const MIN_SUBWORD_SLANG_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ratio_verb: f64,
    pub ratio_noun: f64,
    pub ratio_pron: f64,
    pub ratio_propn: f64,
    pub ratio_modifier: f64,
    pub slang_count: u32,
    pub slang_subword_count: u32,
    pub antonym_pair_count: u32,
    pub connective_count: u32,
    pub polarity_mean: f64,
    pub token_count: u32,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.ratio_verb,
            self.ratio_noun,
            self.ratio_pron,
            self.ratio_propn,
            self.ratio_modifier,
            f64::from(self.slang_count),
            f64::from(self.slang_subword_count),
            f64::from(self.antonym_pair_count),
            f64::from(self.connective_count),
            self.polarity_mean,
            f64::from(self.token_count),
        ]
    }
}

/// Counts whole-word slang tokens and tokens that hide a slang entry of at
/// least [`MIN_SUBWORD_SLANG_LEN`] characters inside a longer word.
pub fn slang_matches(tokens: &TokenSeq, slang: &BTreeSet<String>) -> (u32, u32) {
    let mut whole = 0;
    let mut sub = 0;
    for tok in &tokens.tokens {
        let tok = tok.to_lowercase();
        if slang.contains(&tok) {
            whole += 1;
        } else if slang
            .iter()
            .any(|s| s.chars().count() >= MIN_SUBWORD_SLANG_LEN && tok.contains(s.as_str()))
        {
            sub += 1;
        }
    }
    (whole, sub)
}

const LEMMA_SUFFIXES: [&str; 5] = ["est", "ing", "er", "ed", "s"];

/// Lowercases and strips a comparative/superlative/plural/verbal suffix when
/// the remaining form (allowing `bigg`→`big`, `heavi`→`heavy`, `larg`→`large`)
/// is in the frequency list.
pub fn crude_lemma(word: &str, lex: &LexiconSet) -> String {
    let lower = word.to_lowercase();
    if lex.in_frequency_list(&lower) {
        return lower;
    }
    for suffix in LEMMA_SUFFIXES {
        let Some(stem) = lower.strip_suffix(suffix) else {
            continue;
        };
        if stem.is_empty() {
            continue;
        }
        let mut candidates = vec![stem.to_string()];
        let b = stem.as_bytes();
        if b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2] {
            candidates.push(stem[..stem.len() - 1].to_string());
        }
        if let Some(s) = stem.strip_suffix('i') {
            candidates.push(format!("{s}y"));
        }
        candidates.push(format!("{stem}e"));
        if let Some(c) = candidates.into_iter().find(|c| lex.in_frequency_list(c)) {
            return c;
        }
    }
    lower
}

/// Number of distinct antonym pair types whose members both occur (at
/// different positions) in the token sequence, after crude lemmatization.
pub fn antonym_pair_count(tokens: &TokenSeq, lex: &LexiconSet) -> u32 {
    let lemmas: BTreeSet<String> = tokens
        .tokens
        .iter()
        .filter(|t| !corpus::is_punctuation(t))
        .map(|t| crude_lemma(t, lex))
        .collect();
    lex.antonyms
        .iter()
        .filter(|(a, b)| lemmas.contains(a) && lemmas.contains(b))
        .count() as u32
}

/// Occurrences of connectives; multiword entries match token sequences and
/// the longest match at a position wins.
pub fn connective_count(tokens: &TokenSeq, connectives: &BTreeSet<String>) -> u32 {
    let patterns: Vec<Vec<String>> = connectives
        .iter()
        .map(|c| corpus::tokenize(c, Level::Word, PunctMode::Keep, true).tokens)
        .filter(|p| !p.is_empty())
        .collect();
    let lowered: Vec<String> = tokens.tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut count = 0;
    let mut i = 0;
    while i < lowered.len() {
        let best = patterns
            .iter()
            .filter(|p| lowered[i..].starts_with(p))
            .map(Vec::len)
            .max();
        match best {
            Some(len) => {
                count += 1;
                i += len;
            }
            None => i += 1,
        }
    }
    count
}

pub fn extract_features(doc: &AnnotatedJoke, lex: &LexiconSet) -> Result<FeatureVector, FeatureError> {
    let words: Vec<_> = doc.tokens().filter(|t| t.is_word()).collect();
    if words.is_empty() {
        return Err(FeatureError::DegenerateDocument(doc.joke.id.clone()));
    }
    let n = words.len() as f64;
    let ratio = |pred: &dyn Fn(Upos) -> bool| words.iter().filter(|t| pred(t.upos)).count() as f64 / n;
    let seq = TokenSeq {
        tokens: words.iter().map(|t| t.surface.to_lowercase()).collect(),
        level: Level::Word,
        punct_mode: PunctMode::Drop,
    };
    let (slang_count, slang_subword_count) = slang_matches(&seq, &lex.slang);
    let scores: Vec<f64> = seq.tokens.iter().filter_map(|t| lex.polarity(t)).collect();
    let polarity_mean = if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    Ok(FeatureVector {
        ratio_verb: ratio(&|u| u == Upos::VERB),
        ratio_noun: ratio(&|u| u == Upos::NOUN),
        ratio_pron: ratio(&|u| u == Upos::PRON),
        ratio_propn: ratio(&|u| u == Upos::PROPN),
        ratio_modifier: ratio(&|u| matches!(u, Upos::ADJ | Upos::ADV)),
        slang_count,
        slang_subword_count,
        antonym_pair_count: antonym_pair_count(&seq, lex),
        connective_count: connective_count(&seq, &lex.connectives),
        polarity_mean,
        token_count: words.len() as u32,
    })
}

/// Orders ids numerically when both are integers, lexicographically otherwise.
pub fn natural_id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureRow {
    pub id: String,
    pub label: Option<u8>,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count_class0: usize,
    pub count_class1: usize,
}

/// Equal-width histogram of one feature column split by class. A constant
/// column puts all its mass in the first bin.
pub fn histogram(rows: &[FeatureRow], feature: usize, bins: usize) -> Vec<HistogramBin> {
    let values: Vec<f64> = rows.iter().map(|r| r.features.to_vec()[feature]).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if values.is_empty() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    };
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            bin_lo: lo + width * i as f64,
            bin_hi: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
            count_class0: 0,
            count_class1: 0,
        })
        .collect();
    for (row, v) in rows.iter().zip(values) {
        let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
        match row.label {
            Some(0) => out[idx].count_class0 += 1,
            Some(_) => out[idx].count_class1 += 1,
            None => {}
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportSummary {
    pub rows: usize,
    pub feature_names: Vec<String>,
    /// Per-class feature means keyed by label.
    pub class_means: BTreeMap<u8, Vec<f64>>,
}

impl ExportSummary {
    pub fn mean(&self, label: u8, feature: &str) -> Option<f64> {
        let idx = self.feature_names.iter().position(|n| n == feature)?;
        self.class_means.get(&label).map(|m| m[idx])
    }
}

/// Computes features for every document, sorted by id.
pub fn feature_rows(docs: &[AnnotatedJoke], lex: &LexiconSet) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut rows = docs
        .iter()
        .map(|d| {
            Ok(FeatureRow {
                id: d.joke.id.clone(),
                label: d.joke.label,
                features: extract_features(d, lex)?,
            })
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    rows.sort_by(|a, b| natural_id_cmp(&a.id, &b.id));
    Ok(rows)
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> FeatureError {
    FeatureError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `features.csv` and one `hist_<feature>.csv` per feature into `out_dir`.
pub fn export_feature_table(
    docs: &[AnnotatedJoke],
    lex: &LexiconSet,
    out_dir: &Path,
) -> Result<ExportSummary, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::NoDocuments);
    }
    let rows = feature_rows(docs, lex)?;
    fs::create_dir_all(out_dir).map_err(|e| write_err(out_dir, e))?;

    let table = out_dir.join("features.csv");
    let mut w = csv::Writer::from_path(&table).map_err(|e| write_err(&table, e))?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(|e| write_err(&table, e))?;
    for row in &rows {
        let mut rec = vec![row.id.clone(), row.label.map(|l| l.to_string()).unwrap_or_default()];
        rec.extend(row.features.to_vec().iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| write_err(&table, e))?;
    }
    w.flush().map_err(|e| write_err(&table, e))?;

    for (idx, name) in FEATURE_NAMES.iter().enumerate() {
        let path = out_dir.join(format!("hist_{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| write_err(&path, e))?;
        for bin in histogram(&rows, idx, HISTOGRAM_BINS) {
            w.serialize(bin).map_err(|e| write_err(&path, e))?;
        }
        w.flush().map_err(|e| write_err(&path, e))?;
    }

    let mut sums: BTreeMap<u8, (Vec<f64>, usize)> = BTreeMap::new();
    for row in &rows {
        if let Some(label) = row.label {
            let entry = sums.entry(label).or_insert_with(|| (vec![0.0; FEATURE_NAMES.len()], 0));
            for (s, v) in entry.0.iter_mut().zip(row.features.to_vec()) {
                *s += v;
            }
            entry.1 += 1;
        }
    }
    let class_means = sums
        .into_iter()
        .map(|(label, (s, n))| (label, s.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    Ok(ExportSummary {
        rows: rows.len(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        class_means,
    })
}

/// Contents of a `features.csv`, one entry per row except `names`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub labels: Vec<Option<u8>>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a `features.csv` back into ids, labels and feature rows.
pub fn read_feature_table(path: &Path) -> Result<FeatureTable, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(format!("{}: expected header id,label,<features...>", path.display()));
    }
    let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = i + 2;
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(format!("line {line}: duplicate id {id:?}"));
        }
        let label = match rec[1].trim() {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => return Err(format!("line {line}: bad label {other:?}")),
        };
        let values = rec
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().map_err(|_| format!("line {line}: bad value {v:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        ids.push(id);
        labels.push(label);
        rows.push(values);
    }
    Ok(FeatureTable {
        ids,
        labels,
        names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{AnnotatedToken, AnnotationSource, Sentence};
    use crate::corpus::{split_setup_punchline, Joke};
    use proptest::prelude::*;

    fn words(ws: &[&str]) -> TokenSeq {
        TokenSeq {
            tokens: ws.iter().map(|w| w.to_string()).collect(),
            level: Level::Word,
            punct_mode: PunctMode::Drop,
        }
    }

    fn doc_from(tags: &[(&str, Upos)], label: Option<u8>, id: &str) -> AnnotatedJoke {
        let tokens = tags
            .iter()
            .enumerate()
            .map(|(i, (s, u))| AnnotatedToken {
                position: i,
                surface: s.to_string(),
                lemma: s.to_lowercase(),
                upos: *u,
                deprel: if i == 0 { "root".into() } else { "dep".into() },
                head: if i == 0 { 0 } else { 1 },
                is_entity: false,
                space_after: true,
            })
            .collect();
        let text = tags.iter().map(|(s, _)| *s).collect::<Vec<_>>().join(" ");
        AnnotatedJoke {
            boundary: split_setup_punchline(&text),
            joke: Joke {
                id: id.into(),
                text,
                label,
            },
            sentences: vec![Sentence::new(tokens)],
            source: AnnotationSource::Conllu,
        }
    }

    fn lex_with(f: impl FnOnce(&mut LexiconSet)) -> LexiconSet {
        let mut lex = LexiconSet::default();
        f(&mut lex);
        lex
    }

    #[test]
    fn plain_ratios() {
        let doc = doc_from(
            &[
                ("cats", Upos::NOUN),
                ("chase", Upos::VERB),
                ("mice", Upos::NOUN),
                (".", Upos::PUNCT),
            ],
            None,
            "1",
        );
        let fv = extract_features(&doc, &LexiconSet::default()).unwrap();
        assert_eq!(fv.ratio_noun, 2.0 / 3.0);
        assert_eq!(fv.ratio_verb, 1.0 / 3.0);
        assert_eq!(fv.token_count, 3);
        assert_eq!((fv.slang_count, fv.antonym_pair_count, fv.connective_count), (0, 0, 0));
        assert_eq!(fv.polarity_mean, 0.0);
    }

    #[test]
    fn degenerate_document() {
        let doc = doc_from(&[("!", Upos::PUNCT)], None, "x");
        assert!(matches!(
            extract_features(&doc, &LexiconSet::default()),
            Err(FeatureError::DegenerateDocument(_))
        ));
    }

    #[test]
    fn slang_examples() {
        let slang: BTreeSet<String> = ["dick".to_string()].into();
        assert_eq!(slang_matches(&words(&["addickted"]), &slang), (0, 1));
        assert_eq!(slang_matches(&words(&["dick"]), &slang), (1, 0));
        let slang: BTreeSet<String> = ["ass".to_string()].into();
        assert_eq!(slang_matches(&words(&["class"]), &slang), (0, 0));
        assert_eq!(slang_matches(&words(&[]), &slang), (0, 0));
    }

    #[test]
    fn antonym_examples() {
        let lex = lex_with(|l| {
            l.add_antonym_pair("small", "big");
            l.set_frequency_list(vec!["big".into(), "small".into(), "heavy".into()]);
        });
        let stork = corpus::tokenize(
            "smaller babies may be delivered by a stork but the bigger heavier ones are delivered by a crane",
            Level::Word,
            PunctMode::Drop,
            true,
        );
        assert_eq!(antonym_pair_count(&stork, &lex), 1);
        assert_eq!(antonym_pair_count(&words(&["big", "small", "big"]), &lex), 1);
        assert_eq!(antonym_pair_count(&words(&["big", "tall"]), &lex), 0);
        assert_eq!(crude_lemma("heavier", &lex), "heavy");
    }

    #[test]
    fn connective_example() {
        let joke = "I'd like to think that my girlfriend and I have a relationship that is above being forced to buy simple gifts as part of a made up holiday that exploits working class people through the commercialism of enormous corporations ... But I'd also like to get laid tomorrow night, so Walgreens after work it is.";
        let seq = corpus::tokenize(joke, Level::Word, PunctMode::Drop, true);
        let conns: BTreeSet<String> = ["but".into(), "so".into()].into();
        assert!(connective_count(&seq, &conns) >= 2);
        let conns: BTreeSet<String> = ["on the other hand".into(), "on".into()].into();
        assert_eq!(
            connective_count(&words(&["on", "the", "other", "hand", "on"]), &conns),
            2
        );
    }

    #[test]
    fn polarity_mean_over_known_words() {
        let lex = lex_with(|l| {
            l.polarity.insert("good".into(), 0.9);
            l.polarity.insert("awful".into(), -0.5);
        });
        let doc = doc_from(
            &[("good", Upos::ADJ), ("and", Upos::CCONJ), ("awful", Upos::ADJ)],
            None,
            "p",
        );
        let fv = extract_features(&doc, &lex).unwrap();
        assert!((fv.polarity_mean - 0.2).abs() < 1e-12);
        assert_eq!(fv.ratio_modifier, 2.0 / 3.0);
    }

    #[test]
    fn export_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let docs = vec![
            doc_from(&[("a", Upos::NOUN)], Some(1), "2"),
            doc_from(&[("a", Upos::NOUN)], Some(0), "10"),
        ];
        let summary = export_feature_table(&docs, &LexiconSet::default(), dir.path()).unwrap();
        assert_eq!(summary.rows, 2);
        let FeatureTable {
            ids,
            labels,
            names,
            rows,
        } = read_feature_table(&dir.path().join("features.csv")).unwrap();
        assert_eq!(ids, ["2", "10"]);
        assert_eq!(labels, [Some(1), Some(0)]);
        // one column per feature plus the label, after the id
        assert_eq!(names.len() + 1, 12);
        assert_eq!(rows[0].len(), 11);
        // identical docs: all mass in one bin
        let hist = histogram(&feature_rows(&docs, &LexiconSet::default()).unwrap(), 1, HISTOGRAM_BINS);
        assert_eq!(hist.len(), 20);
        assert_eq!(hist.iter().filter(|b| b.count_class0 + b.count_class1 > 0).count(), 1);
        let text = fs::read_to_string(dir.path().join("hist_ratio_noun.csv")).unwrap();
        assert!(text.starts_with("bin_lo,bin_hi,count_class0,count_class1\n"));
        assert!(export_feature_table(&[], &LexiconSet::default(), dir.path()).is_err());
    }

    #[test]
    fn natural_ordering() {
        let mut ids = vec!["10", "2", "b", "1", "a"];
        ids.sort_by(|a, b| natural_id_cmp(a, b));
        assert_eq!(ids, ["1", "2", "10", "a", "b"]);
    }

    fn arb_upos() -> impl Strategy<Value = Upos> {
        proptest::sample::select(Upos::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn ratio_invariants(tags in proptest::collection::vec(("[a-z]{1,6}", arb_upos()), 1..25)) {
            let tags: Vec<(String, Upos)> = tags;
            let borrowed: Vec<(&str, Upos)> = tags.iter().map(|(s, u)| (s.as_str(), *u)).collect();
            let doc = doc_from(&borrowed, None, "p");
            match extract_features(&doc, &LexiconSet::default()) {
                Ok(fv) => {
                    let core = fv.ratio_verb + fv.ratio_noun + fv.ratio_pron + fv.ratio_propn;
                    prop_assert!(core <= 1.0 + 1e-12);
                    for r in [fv.ratio_verb, fv.ratio_noun, fv.ratio_pron, fv.ratio_propn, fv.ratio_modifier] {
                        prop_assert!((0.0..=1.0).contains(&r));
                    }
                    // reversing token order does not change anything
                    let mut rev = borrowed.clone();
                    rev.reverse();
                    let fv2 = extract_features(&doc_from(&rev, None, "p"), &LexiconSet::default()).unwrap();
                    prop_assert_eq!(fv.to_vec(), fv2.to_vec());
                }
                Err(_) => prop_assert!(borrowed.iter().all(|(_, u)| *u == Upos::PUNCT)),
            }
        }

        #[test]
        fn slang_counts_disjoint(toks in proptest::collection::vec("[a-d]{1,7}", 0..12),
                                 slang in proptest::collection::btree_set("[a-d]{2,5}", 0..6)) {
            let seq = words(&toks.iter().map(String::as_str).collect::<Vec<_>>());
            let (whole, sub) = slang_matches(&seq, &slang);
            prop_assert!(whole as usize + sub as usize <= toks.len());
        }
    }
}
