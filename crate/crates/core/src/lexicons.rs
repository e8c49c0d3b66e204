//! The lexical resources used by feature extraction and template scoring.
//!
//! A lexicon directory holds up to five UTF-8 files, all with `#` comments:
//!
//! | file              | format                                   |
//! |-------------------|------------------------------------------|
//! | `slang.txt`       | one entry per line                       |
//! | `connectives.txt` | one entry per line, may be multiword     |
//! | `antonyms.tsv`    | `lemma<TAB>lemma`                        |
//! | `polarity.tsv`    | `word<TAB>score`, score in [-1, 1]       |
//! | `freq.txt`        | one word per line, most frequent first   |
//!
//! A missing file yields an empty resource and a warning.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::Path;

use log::warn;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Malformed {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("freq.txt line {line}: duplicate word {word:?}")]
    DuplicateFrequencyWord { line: usize, word: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LexiconSet {
    pub slang: BTreeSet<String>,
    /// Unordered pairs stored with the lexicographically smaller lemma first.
    pub antonyms: BTreeSet<(String, String)>,
    pub connectives: BTreeSet<String>,
    pub polarity: BTreeMap<String, f64>,
    /// Words in rank order; rank = index + 1.
    freq_list: Vec<String>,
    #[serde(skip)]
    freq_ranks: HashMap<String, usize>,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl LexiconSet {
    pub fn load_dir(dir: &Path) -> Result<Self, LexiconError> {
        let read = |name: &str| -> Result<Option<String>, LexiconError> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(s) => Ok(Some(s)),
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    warn!("lexicon file {} not found; using an empty resource", path.display());
                    Ok(None)
                }
                Err(source) => Err(LexiconError::Io {
                    file: path.display().to_string(),
                    source,
                }),
            }
        };
        let mut lex = LexiconSet::default();
        if let Some(text) = read("slang.txt")? {
            lex.slang = parse_word_list(&text);
        }
        if let Some(text) = read("connectives.txt")? {
            lex.connectives = parse_word_list(&text)
                .into_iter()
                .map(|c| c.split_whitespace().collect::<Vec<_>>().join(" "))
                .collect();
        }
        if let Some(text) = read("antonyms.tsv")? {
            lex.antonyms = parse_antonyms(&text)?;
        }
        if let Some(text) = read("polarity.tsv")? {
            lex.polarity = parse_polarity(&text)?;
        }
        if let Some(text) = read("freq.txt")? {
            lex.set_frequency_list(parse_frequency_list(&text)?);
        }
        Ok(lex)
    }

    /// Replaces the frequency list. Words must already be unique.
    pub fn set_frequency_list(&mut self, words: Vec<String>) {
        self.freq_ranks = words.iter().enumerate().map(|(i, w)| (w.clone(), i + 1)).collect();
        self.freq_list = words;
    }

    pub fn frequency_list(&self) -> &[String] {
        &self.freq_list
    }

    /// R, the largest rank. An empty list still reports 1 so ranks stay in [1, R].
    pub fn max_rank(&self) -> usize {
        self.freq_list.len().max(1)
    }

    pub fn in_frequency_list(&self, word: &str) -> bool {
        self.freq_ranks.contains_key(&word.to_lowercase())
    }

    /// Case-insensitive rank; out-of-vocabulary words get the maximum rank.
    pub fn frequency_rank(&self, word: &str) -> usize {
        self.freq_ranks
            .get(&word.to_lowercase())
            .copied()
            .unwrap_or_else(|| self.max_rank())
    }

    pub fn is_antonym_pair(&self, a: &str, b: &str) -> bool {
        self.antonyms
            .contains(&ordered_pair(&a.to_lowercase(), &b.to_lowercase()))
    }

    pub fn polarity(&self, word: &str) -> Option<f64> {
        self.polarity.get(&word.to_lowercase()).copied()
    }

    pub fn add_antonym_pair(&mut self, a: &str, b: &str) {
        self.antonyms.insert(ordered_pair(&a.to_lowercase(), &b.to_lowercase()));
    }

    /// Canonical JSON form, stable across loads of the same directory.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lexicon set serializes")
    }
}

pub fn load_lexicon_set(dir: &Path) -> Result<LexiconSet, LexiconError> {
    LexiconSet::load_dir(dir)
}

fn parse_word_list(text: &str) -> BTreeSet<String> {
    content_lines(text).map(|(_, l)| l.to_lowercase()).collect()
}

fn parse_antonyms(text: &str) -> Result<BTreeSet<(String, String)>, LexiconError> {
    let mut out = BTreeSet::new();
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(LexiconError::Malformed {
                file: "antonyms.tsv",
                line,
                message: format!("expected two tab-separated lemmas, found {}", fields.len()),
            });
        }
        let (a, b) = (fields[0].to_lowercase(), fields[1].to_lowercase());
        if a == b {
            return Err(LexiconError::Malformed {
                file: "antonyms.tsv",
                line,
                message: format!("{a:?} cannot be its own antonym"),
            });
        }
        out.insert(ordered_pair(&a, &b));
    }
    Ok(out)
}

fn parse_polarity(text: &str) -> Result<BTreeMap<String, f64>, LexiconError> {
    let mut out = BTreeMap::new();
    for (line, l) in content_lines(text) {
        let malformed = |message: String| LexiconError::Malformed {
            file: "polarity.tsv",
            line,
            message,
        };
        let (word, value) = l
            .split_once('\t')
            .ok_or_else(|| malformed("expected word<TAB>score".into()))?;
        let score: f64 = value
            .trim()
            .parse()
            .map_err(|_| malformed(format!("score {:?} is not a number", value.trim())))?;
        if !(-1.0..=1.0).contains(&score) {
            return Err(malformed(format!("score {score} outside [-1, 1]")));
        }
        // first entry wins on duplicates
        out.entry(word.trim().to_lowercase()).or_insert(score);
    }
    Ok(out)
}

fn parse_frequency_list(text: &str) -> Result<Vec<String>, LexiconError> {
    let mut seen = BTreeSet::new();
    let mut words = Vec::new();
    for (line, l) in content_lines(text) {
        let word = l.to_lowercase();
        if !seen.insert(word.clone()) {
            return Err(LexiconError::DuplicateFrequencyWord { line, word });
        }
        words.push(word);
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_dir(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in files {
            fs::write(dir.path().join(name), body).unwrap();
        }
        dir
    }

    #[test]
    fn antonyms_are_symmetric() {
        let dir = write_dir(&[("antonyms.tsv", "big\tsmall\nSmall\tBig\n")]);
        let lex = LexiconSet::load_dir(dir.path()).unwrap();
        assert!(lex.is_antonym_pair("small", "big"));
        assert!(lex.is_antonym_pair("big", "small"));
        assert_eq!(lex.antonyms.len(), 1);
    }

    #[test]
    fn frequency_ranks_follow_line_order() {
        let dir = write_dir(&[("freq.txt", "# top words\nthe\nof\n")]);
        let lex = LexiconSet::load_dir(dir.path()).unwrap();
        assert_eq!(lex.frequency_rank("the"), 1);
        assert_eq!(lex.frequency_rank("The"), 1);
        assert_eq!(lex.frequency_rank("of"), 2);
        assert_eq!(lex.frequency_rank("zyzzyva"), 2);
    }

    #[test]
    fn oov_gets_max_rank() {
        let mut lex = LexiconSet::default();
        lex.set_frequency_list((0..10_000).map(|i| format!("w{i}")).collect());
        assert_eq!(lex.frequency_rank("w0"), 1);
        assert_eq!(lex.frequency_rank("never-seen"), 10_000);
    }

    #[test]
    fn polarity_parsing() {
        let dir = write_dir(&[("polarity.tsv", "good\t0.9\n")]);
        let lex = LexiconSet::load_dir(dir.path()).unwrap();
        assert_eq!(lex.polarity("good"), Some(0.9));

        let dir = write_dir(&[("polarity.tsv", "good\t0.9\nbad\tvery\n")]);
        assert!(matches!(
            LexiconSet::load_dir(dir.path()),
            Err(LexiconError::Malformed { line: 2, .. })
        ));
        let dir = write_dir(&[("polarity.tsv", "good\t1.5\n")]);
        assert!(LexiconSet::load_dir(dir.path()).is_err());
    }

    #[test]
    fn duplicate_frequency_word_rejected() {
        let dir = write_dir(&[("freq.txt", "the\nof\nThe\n")]);
        assert!(matches!(
            LexiconSet::load_dir(dir.path()),
            Err(LexiconError::DuplicateFrequencyWord { line: 3, .. })
        ));
    }

    #[test]
    fn missing_files_are_empty() {
        let dir = tempfile::tempdir().unwrap();
        let lex = LexiconSet::load_dir(dir.path()).unwrap();
        assert!(lex.slang.is_empty());
        assert_eq!(lex.max_rank(), 1);
        assert_eq!(lex.frequency_rank("anything"), 1);
    }

    #[test]
    fn loading_is_deterministic() {
        let dir = write_dir(&[
            ("slang.txt", "Zonk\nbooty\nzonk\n"),
            ("connectives.txt", "but\non  the other hand\n"),
            ("antonyms.tsv", "hot\tcold\nbig\tsmall\n"),
            ("polarity.tsv", "good\t0.5\nbad\t-0.5\n"),
            ("freq.txt", "the\nof\nand\n"),
        ]);
        let a = LexiconSet::load_dir(dir.path()).unwrap().to_canonical_json();
        let b = LexiconSet::load_dir(dir.path()).unwrap().to_canonical_json();
        assert_eq!(a, b);
        let lex = LexiconSet::load_dir(dir.path()).unwrap();
        assert!(lex.slang.contains("zonk"));
        assert_eq!(lex.slang.len(), 2);
        assert!(lex.connectives.contains("on the other hand"));
    }

    proptest! {
        #[test]
        fn rank_is_total(words in proptest::collection::btree_set("[a-z]{1,6}", 0..30), probe in "[a-zA-Z]{0,6}") {
            let mut lex = LexiconSet::default();
            lex.set_frequency_list(words.into_iter().collect());
            let r = lex.frequency_rank(&probe);
            prop_assert!(r >= 1 && r <= lex.max_rank());
        }
    }
}
