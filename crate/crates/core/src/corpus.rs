//! Corpus ingestion: loading jokes from JSONL/CSV, text cleaning, setup/punchline
//! splitting and tokenization.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("text is empty after cleaning")]
    EmptyText,
}

/// One document of a corpus. `label` is 1 for humor, 0 for non-humor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Joke {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

impl Joke {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Joke {
            id: id.into(),
            text: text.into(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<IdField>,
    text: String,
    #[serde(default)]
    label: Option<LabelField>,
}

// Ids and labels show up as both strings and numbers in the wild.
#[derive(Deserialize)]
#[serde(untagged)]
enum IdField {
    Str(String),
    Int(i64),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelField {
    Int(i64),
    Str(String),
}

fn parse_label(label: Option<LabelField>, line: usize) -> Result<Option<u8>, CorpusError> {
    let value = match label {
        None => return Ok(None),
        Some(LabelField::Int(v)) => v,
        Some(LabelField::Str(s)) if s.trim().is_empty() => return Ok(None),
        Some(LabelField::Str(s)) => s.trim().parse::<i64>().map_err(|_| CorpusError::Malformed {
            line,
            message: format!("label {s:?} is not 0 or 1"),
        })?,
    };
    match value {
        0 | 1 => Ok(Some(value as u8)),
        other => Err(CorpusError::Malformed {
            line,
            message: format!("label {other} is not 0 or 1"),
        }),
    }
}

struct Assembler {
    seen: HashSet<String>,
    jokes: Vec<Joke>,
}

impl Assembler {
    fn new() -> Self {
        Assembler {
            seen: HashSet::new(),
            jokes: Vec::new(),
        }
    }

    fn push(&mut self, record: RawRecord, line: usize) -> Result<(), CorpusError> {
        let id = match record.id {
            Some(IdField::Str(s)) if !s.trim().is_empty() => s.trim().to_string(),
            Some(IdField::Int(i)) => i.to_string(),
            _ => self.jokes.len().to_string(),
        };
        if !self.seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line, id });
        }
        if clean_text(&record.text).is_err() {
            return Err(CorpusError::Malformed {
                line,
                message: "text is empty after cleaning".into(),
            });
        }
        let label = parse_label(record.label, line)?;
        self.jokes.push(Joke {
            id,
            text: record.text,
            label,
        });
        Ok(())
    }
}

/// Loads a corpus file. Records keep their order; missing ids become the
/// record's 0-based index.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Joke>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file)),
        CorpusFormat::Csv => read_csv(file),
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Joke>, CorpusError> {
    let mut asm = Assembler::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        asm.push(record, lineno)?;
    }
    Ok(asm.jokes)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Joke>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut asm = Assembler::new();
    for result in rdr.deserialize::<RawRecord>() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            CorpusError::Malformed {
                line,
                message: e.to_string(),
            }
        })?;
        // header is line 1, so the n-th record sits on line n + 1
        let line = asm.jokes.len() + 2;
        asm.push(record, line)?;
    }
    Ok(asm.jokes)
}

fn normalize_char(c: char) -> Option<&'static str> {
    Some(match c {
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{00AB}' | '\u{00BB}' => "\"",
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' => "'",
        '\u{2013}' | '\u{2014}' | '\u{2015}' | '\u{2212}' | '\u{2010}' | '\u{2011}' => "-",
        '\u{2026}' => "...",
        _ => return None,
    })
}

fn strip_surrounding_quotes(s: &str) -> Option<&str> {
    let mut chars = s.chars();
    let first = chars.next()?;
    let last = chars.next_back()?;
    if first != last || !(first == '"' || first == '\'') {
        return None;
    }
    let inner = &s[1..s.len() - 1];
    if inner.contains(first) {
        return None;
    }
    Some(inner.trim())
}

/// Normalizes whitespace, quotes and dashes. Asterisks are left alone.
pub fn clean_text(raw: &str) -> Result<String, CorpusError> {
    let mut normalized = String::with_capacity(raw.len());
    for c in raw.chars() {
        match normalize_char(c) {
            Some(rep) => normalized.push_str(rep),
            None => normalized.push(c),
        }
    }
    let mut text = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
    while let Some(inner) = strip_surrounding_quotes(&text) {
        text = inner.to_string();
    }
    if text.is_empty() {
        return Err(CorpusError::EmptyText);
    }
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRule {
    Ellipsis,
    Question,
    Sentence,
    None,
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SplitRule::Ellipsis => "ellipsis",
            SplitRule::Question => "question",
            SplitRule::Sentence => "sentence",
            SplitRule::None => "none",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetupPunchline {
    pub setup: String,
    /// Text between setup and punchline; `setup + separator + punchline` is the input.
    pub separator: String,
    pub punchline: String,
    pub split_rule: SplitRule,
}

impl SetupPunchline {
    pub fn reconstruct(&self) -> String {
        format!("{}{}{}", self.setup, self.separator, self.punchline)
    }
}

const ELLIPSIS_SEP: &str = " ... ";

fn split_after(text: &str, idx: usize, rule: SplitRule) -> Option<SetupPunchline> {
    let (setup, rest) = text.split_at(idx);
    let punchline = rest.trim_start();
    if setup.trim().is_empty() || punchline.trim().is_empty() {
        return None;
    }
    Some(SetupPunchline {
        setup: setup.to_string(),
        separator: rest[..rest.len() - punchline.len()].to_string(),
        punchline: punchline.to_string(),
        split_rule: rule,
    })
}

/// Splits cleaned text into setup and punchline. Rules are tried in order:
/// first `" ... "`, then the first `?` followed by text, then the first
/// sentence-final `.`/`!` followed by whitespace and text.
pub fn split_setup_punchline(text: &str) -> SetupPunchline {
    if let Some(idx) = text.find(ELLIPSIS_SEP) {
        let setup = &text[..idx];
        let punchline = &text[idx + ELLIPSIS_SEP.len()..];
        if !setup.trim().is_empty() && !punchline.trim().is_empty() {
            return SetupPunchline {
                setup: setup.to_string(),
                separator: ELLIPSIS_SEP.to_string(),
                punchline: punchline.to_string(),
                split_rule: SplitRule::Ellipsis,
            };
        }
    }
    for (idx, c) in text.char_indices() {
        if c == '?' {
            if let Some(sp) = split_after(text, idx + 1, SplitRule::Question) {
                return sp;
            }
        }
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (i, &(idx, c)) in chars.iter().enumerate() {
        if (c == '.' || c == '!') && chars.get(i + 1).is_some_and(|&(_, n)| n.is_whitespace()) {
            if let Some(sp) = split_after(text, idx + 1, SplitRule::Sentence) {
                return sp;
            }
        }
    }
    SetupPunchline {
        setup: text.to_string(),
        separator: String::new(),
        punchline: String::new(),
        split_rule: SplitRule::None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Word,
    Char,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Word => "word",
            Level::Char => "char",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PunctMode {
    Keep,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub level: Level,
    pub punct_mode: PunctMode,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Joins tokens back into text: single spaces at word level, nothing at char level.
    pub fn join(&self) -> String {
        match self.level {
            Level::Word => self.tokens.join(" "),
            Level::Char => self.tokens.concat(),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// True when every character of `s` is punctuation or a symbol (no letters,
/// digits or whitespace). The empty string is not punctuation.
pub fn is_punctuation(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace())
}

/// Word level: maximal runs of letters, digits and apostrophes form tokens and
/// every other non-space character stands alone. Char level: one token per character.
pub fn tokenize(text: &str, level: Level, punct_mode: PunctMode, lowercase: bool) -> TokenSeq {
    let source = if lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    let mut tokens = Vec::new();
    match level {
        Level::Char => {
            for c in source.chars() {
                tokens.push(c.to_string());
            }
        }
        Level::Word => {
            let mut current = String::new();
            for c in source.chars() {
                if is_word_char(c) {
                    current.push(c);
                    continue;
                }
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                if !c.is_whitespace() {
                    tokens.push(c.to_string());
                }
            }
            if !current.is_empty() {
                tokens.push(current);
            }
        }
    }
    if punct_mode == PunctMode::Drop {
        tokens.retain(|t| !is_punctuation(t));
    }
    TokenSeq {
        tokens,
        level,
        punct_mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jsonl_record_keeps_text() {
        let data = r#"{"id":"1","text":"i found waldo ... he's mexican now."}"#;
        let jokes = read_jsonl(data.as_bytes()).unwrap();
        assert_eq!(jokes, vec![Joke::new("1", "i found waldo ... he's mexican now.")]);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(read_jsonl("".as_bytes()).unwrap().is_empty());
        assert!(read_csv("id,text\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn csv_without_ids_numbers_rows() {
        let data = "text,label\nfirst,1\nsecond,0\nthird,\n";
        let jokes = read_csv(data.as_bytes()).unwrap();
        let ids: Vec<_> = jokes.iter().map(|j| j.id.as_str()).collect();
        assert_eq!(ids, ["0", "1", "2"]);
        assert_eq!(jokes[0].label, Some(1));
        assert_eq!(jokes[2].label, None);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let data = "{\"text\":\"ok\"}\n\n{not json}\n";
        match read_jsonl(data.as_bytes()) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let data = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        assert!(matches!(
            read_jsonl(data.as_bytes()),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn bad_label_rejected() {
        let data = "{\"text\":\"x\",\"label\":3}\n";
        assert!(matches!(
            read_jsonl(data.as_bytes()),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn clean_examples() {
        assert_eq!(clean_text("  \"Hello   world\" ").unwrap(), "Hello world");
        assert_eq!(clean_text("*stepped on* it").unwrap(), "*stepped on* it");
        assert!(matches!(clean_text("   "), Err(CorpusError::EmptyText)));
        assert_eq!(
            clean_text("\u{201C}It\u{2019}s fine \u{2014} really\u{201D}").unwrap(),
            "It's fine - really"
        );
        assert!(clean_text("\"\"").is_err());
    }

    #[test]
    fn split_examples() {
        let sp = split_setup_punchline("i found waldo ... he's mexican now.");
        assert_eq!(sp.setup, "i found waldo");
        assert_eq!(sp.punchline, "he's mexican now.");
        assert_eq!(sp.split_rule, SplitRule::Ellipsis);

        let sp = split_setup_punchline("Why did the chicken cross the road? To get to the other side.");
        assert_eq!(sp.setup, "Why did the chicken cross the road?");
        assert_eq!(sp.punchline, "To get to the other side.");
        assert_eq!(sp.split_rule, SplitRule::Question);

        let sp = split_setup_punchline("no separator here");
        assert_eq!(sp.punchline, "");
        assert_eq!(sp.split_rule, SplitRule::None);

        let sp = split_setup_punchline("I tried. It failed.");
        assert_eq!(sp.split_rule, SplitRule::Sentence);
        assert_eq!(sp.setup, "I tried.");

        // a trailing question mark alone is not a split point
        let sp = split_setup_punchline("Knock knock. Who is there?");
        assert_eq!(sp.split_rule, SplitRule::Sentence);
    }

    #[test]
    fn tokenize_examples() {
        let t = tokenize("don't stop!", Level::Word, PunctMode::Keep, false);
        assert_eq!(t.tokens, ["don't", "stop", "!"]);
        let t = tokenize("don't stop!", Level::Word, PunctMode::Drop, false);
        assert_eq!(t.tokens, ["don't", "stop"]);
        let t = tokenize("ab", Level::Char, PunctMode::Keep, false);
        assert_eq!(t.tokens, ["a", "b"]);
        let t = tokenize("Went *stepped", Level::Word, PunctMode::Keep, true);
        assert_eq!(t.tokens, ["went", "*", "stepped"]);
        let t = tokenize("a b.", Level::Char, PunctMode::Drop, false);
        assert_eq!(t.tokens, ["a", " ", "b"]);
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(s in "[ a-zA-Z'\"\u{201C}\u{201D}\u{2014}*.?\t\n]{0,40}") {
            if let Ok(once) = clean_text(&s) {
                prop_assert_eq!(clean_text(&once).unwrap(), once);
            }
        }

        #[test]
        fn word_tokens_round_trip(s in "[ a-z0-9'.,!?*()-]{0,60}") {
            let seq = tokenize(&s, Level::Word, PunctMode::Keep, false);
            let again = tokenize(&seq.join(), Level::Word, PunctMode::Keep, false);
            prop_assert_eq!(again.tokens, seq.tokens);
        }

        #[test]
        fn drop_mode_has_no_punctuation(s in "[ a-z'.,!?*-]{0,60}") {
            let seq = tokenize(&s, Level::Word, PunctMode::Drop, false);
            prop_assert!(seq.tokens.iter().all(|t| !t.is_empty() && !is_punctuation(t)));
        }

        #[test]
        fn split_reconstructs(s in "[ a-z.?!]{1,50}") {
            if let Ok(text) = clean_text(&s) {
                let sp = split_setup_punchline(&text);
                if sp.split_rule == SplitRule::None {
                    prop_assert!(sp.punchline.is_empty());
                } else {
                    prop_assert!(!sp.punchline.is_empty());
                    prop_assert_eq!(sp.reconstruct(), text);
                }
            }
        }
    }
}
