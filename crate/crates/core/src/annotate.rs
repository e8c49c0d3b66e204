//! Token-level annotations (UPOS, dependency head/relation, entity flag).
//!
//! Two sources produce the same [`AnnotatedToken`] structure: CoNLL-U files
//! written by an external parser, and [`heuristic_annotate`], a lexicon and
//! suffix based approximation that needs no model. Everything downstream
//! (features, templates) is agnostic to which one was used.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, is_punctuation, Joke, Level, PunctMode, SetupPunchline, TokenSeq};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: invalid {column} value {value:?}")]
    InvalidField {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: head {head} points outside a sentence of {len} tokens")]
    DanglingHead { line: usize, head: usize, len: usize },
    #[error("sentence ending at line {line} has {roots} roots, expected exactly one")]
    RootCount { line: usize, roots: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("document {0:?} has no tokens")]
    EmptyDocument(String),
}

/// The 17 universal POS tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Upos {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::ADJ,
        Upos::ADP,
        Upos::ADV,
        Upos::AUX,
        Upos::CCONJ,
        Upos::DET,
        Upos::INTJ,
        Upos::NOUN,
        Upos::NUM,
        Upos::PART,
        Upos::PRON,
        Upos::PROPN,
        Upos::PUNCT,
        Upos::SCONJ,
        Upos::SYM,
        Upos::VERB,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::ADJ => "ADJ",
            Upos::ADP => "ADP",
            Upos::ADV => "ADV",
            Upos::AUX => "AUX",
            Upos::CCONJ => "CCONJ",
            Upos::DET => "DET",
            Upos::INTJ => "INTJ",
            Upos::NOUN => "NOUN",
            Upos::NUM => "NUM",
            Upos::PART => "PART",
            Upos::PRON => "PRON",
            Upos::PROPN => "PROPN",
            Upos::PUNCT => "PUNCT",
            Upos::SCONJ => "SCONJ",
            Upos::SYM => "SYM",
            Upos::VERB => "VERB",
            Upos::X => "X",
        }
    }

    pub fn is_nominal(self) -> bool {
        matches!(self, Upos::NOUN | Upos::PROPN)
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownUpos(pub String);

impl fmt::Display for UnknownUpos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown UPOS tag {:?}", self.0)
    }
}

impl std::error::Error for UnknownUpos {}

impl FromStr for Upos {
    type Err = UnknownUpos;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Upos::ALL
            .iter()
            .copied()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| UnknownUpos(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    /// 0-based index within the sentence.
    pub position: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
    pub deprel: String,
    /// 1-based index of the head token, 0 for the root.
    pub head: usize,
    pub is_entity: bool,
    #[serde(default = "default_true")]
    pub space_after: bool,
}

fn default_true() -> bool {
    true
}

impl AnnotatedToken {
    pub fn is_word(&self) -> bool {
        self.upos != Upos::PUNCT && !is_punctuation(&self.surface)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sentence {
    /// Document id from the most recent `# newdoc id = ...` comment.
    pub doc_id: Option<String>,
    pub sent_id: Option<String>,
    pub text: Option<String>,
    pub tokens: Vec<AnnotatedToken>,
}

impl Sentence {
    pub fn new(tokens: Vec<AnnotatedToken>) -> Self {
        Sentence {
            tokens,
            ..Default::default()
        }
    }

    pub fn head_of(&self, token: &AnnotatedToken) -> Option<&AnnotatedToken> {
        match token.head {
            0 => None,
            h => self.tokens.get(h - 1),
        }
    }

    pub fn root_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.head == 0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationSource {
    Conllu,
    Heuristic,
}

impl AnnotationSource {
    pub fn approximate(self) -> bool {
        self == AnnotationSource::Heuristic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedJoke {
    pub joke: Joke,
    pub sentences: Vec<Sentence>,
    pub boundary: SetupPunchline,
    pub source: AnnotationSource,
}

impl AnnotatedJoke {
    pub fn tokens(&self) -> impl Iterator<Item = &AnnotatedToken> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// Surfaces joined with their recorded spacing.
    pub fn detokenize(&self) -> String {
        detokenize(self.tokens())
    }
}

pub fn detokenize<'a>(tokens: impl IntoIterator<Item = &'a AnnotatedToken>) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for t in tokens {
        if pending_space {
            out.push(' ');
        }
        out.push_str(&t.surface);
        pending_space = t.space_after;
    }
    out
}

fn parse_misc(misc: &str) -> (bool, bool) {
    let mut entity = false;
    let mut space_after = true;
    if misc != "_" {
        for item in misc.split('|') {
            if item == "NE=Yes" || item.starts_with("Entity=") {
                entity = true;
            }
            if item == "SpaceAfter=No" {
                space_after = false;
            }
        }
    }
    (entity, space_after)
}

fn finish_sentence(sentence: &mut Sentence, end_line: usize) -> Result<Sentence, AnnotateError> {
    let len = sentence.tokens.len();
    for (i, t) in sentence.tokens.iter_mut().enumerate() {
        t.position = i;
    }
    let roots = sentence.root_count();
    if roots != 1 {
        return Err(AnnotateError::RootCount { line: end_line, roots });
    }
    for t in &sentence.tokens {
        if t.head > len {
            return Err(AnnotateError::DanglingHead {
                line: end_line,
                head: t.head,
                len,
            });
        }
    }
    // the document id carries over to following sentences
    let doc_id = sentence.doc_id.clone();
    let done = std::mem::take(sentence);
    sentence.doc_id = doc_id;
    Ok(done)
}

/// Reads CoNLL-U. Multiword-token ranges (`1-2`) and empty nodes (`1.1`) are
/// skipped. `# newdoc id = X` and `# sent_id = X` comments are kept on the sentence.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<Sentence>, AnnotateError> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut lineno = 0;
    for line in reader.lines() {
        lineno += 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.tokens.is_empty() {
                sentences.push(finish_sentence(&mut current, lineno)?);
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let value = value.trim().to_string();
                match key.trim() {
                    "newdoc id" => current.doc_id = Some(value),
                    "sent_id" => current.sent_id = Some(value),
                    "text" => current.text = Some(value),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(AnnotateError::ColumnCount {
                line: lineno,
                found: cols.len(),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| AnnotateError::InvalidField {
            line: lineno,
            column: "ID",
            value: cols[0].to_string(),
        })?;
        if id != current.tokens.len() + 1 {
            return Err(AnnotateError::InvalidField {
                line: lineno,
                column: "ID",
                value: cols[0].to_string(),
            });
        }
        let upos = cols[3].parse().map_err(|_| AnnotateError::InvalidField {
            line: lineno,
            column: "UPOS",
            value: cols[3].to_string(),
        })?;
        let head: usize = cols[6].parse().map_err(|_| AnnotateError::InvalidField {
            line: lineno,
            column: "HEAD",
            value: cols[6].to_string(),
        })?;
        let (is_entity, space_after) = parse_misc(cols[9]);
        current.tokens.push(AnnotatedToken {
            position: id - 1,
            surface: cols[1].to_string(),
            lemma: if cols[2] == "_" {
                cols[1].to_lowercase()
            } else {
                cols[2].to_string()
            },
            upos,
            deprel: cols[7].to_string(),
            head,
            is_entity,
            space_after,
        });
    }
    if !current.tokens.is_empty() {
        sentences.push(finish_sentence(&mut current, lineno + 1)?);
    }
    Ok(sentences)
}

pub fn read_conllu_file(path: &Path) -> Result<Vec<Sentence>, AnnotateError> {
    let file = std::fs::File::open(path)?;
    parse_conllu(std::io::BufReader::new(file))
}

/// Writes sentences as CoNLL-U. Columns not modelled here (XPOS, FEATS, DEPS)
/// are written as `_`.
pub fn write_conllu<W: Write>(mut out: W, sentences: &[Sentence]) -> std::io::Result<()> {
    let mut last_doc: Option<&str> = None;
    for s in sentences {
        if let Some(doc) = s.doc_id.as_deref() {
            if last_doc != Some(doc) {
                writeln!(out, "# newdoc id = {doc}")?;
                last_doc = Some(doc);
            }
        }
        if let Some(id) = &s.sent_id {
            writeln!(out, "# sent_id = {id}")?;
        }
        if let Some(text) = &s.text {
            writeln!(out, "# text = {text}")?;
        }
        for (i, t) in s.tokens.iter().enumerate() {
            let mut misc = Vec::new();
            if t.is_entity {
                misc.push("NE=Yes");
            }
            if !t.space_after {
                misc.push("SpaceAfter=No");
            }
            let misc = if misc.is_empty() {
                "_".to_string()
            } else {
                misc.join("|")
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t{}",
                i + 1,
                t.surface,
                t.lemma,
                t.upos,
                t.head,
                t.deprel,
                misc
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

const CLOSED_CLASS: &[(&str, Upos)] = &[
    // determiners
    ("the", Upos::DET),
    ("a", Upos::DET),
    ("an", Upos::DET),
    ("this", Upos::DET),
    ("that", Upos::DET),
    ("these", Upos::DET),
    ("those", Upos::DET),
    ("every", Upos::DET),
    ("each", Upos::DET),
    ("some", Upos::DET),
    ("any", Upos::DET),
    ("no", Upos::DET),
    ("all", Upos::DET),
    ("another", Upos::DET),
    // pronouns
    ("i", Upos::PRON),
    ("me", Upos::PRON),
    ("my", Upos::PRON),
    ("mine", Upos::PRON),
    ("you", Upos::PRON),
    ("your", Upos::PRON),
    ("yours", Upos::PRON),
    ("he", Upos::PRON),
    ("him", Upos::PRON),
    ("his", Upos::PRON),
    ("she", Upos::PRON),
    ("her", Upos::PRON),
    ("hers", Upos::PRON),
    ("it", Upos::PRON),
    ("its", Upos::PRON),
    ("we", Upos::PRON),
    ("us", Upos::PRON),
    ("our", Upos::PRON),
    ("they", Upos::PRON),
    ("them", Upos::PRON),
    ("their", Upos::PRON),
    ("what", Upos::PRON),
    ("who", Upos::PRON),
    ("whom", Upos::PRON),
    ("which", Upos::PRON),
    ("someone", Upos::PRON),
    ("something", Upos::PRON),
    ("nothing", Upos::PRON),
    ("everyone", Upos::PRON),
    ("everything", Upos::PRON),
    ("myself", Upos::PRON),
    ("yourself", Upos::PRON),
    ("himself", Upos::PRON),
    ("herself", Upos::PRON),
    ("themselves", Upos::PRON),
    ("i'm", Upos::PRON),
    ("i've", Upos::PRON),
    ("i'd", Upos::PRON),
    ("i'll", Upos::PRON),
    ("you're", Upos::PRON),
    ("he's", Upos::PRON),
    ("she's", Upos::PRON),
    ("it's", Upos::PRON),
    ("they're", Upos::PRON),
    ("we're", Upos::PRON),
    ("what's", Upos::PRON),
    ("that's", Upos::PRON),
    // auxiliaries
    ("is", Upos::AUX),
    ("am", Upos::AUX),
    ("are", Upos::AUX),
    ("was", Upos::AUX),
    ("were", Upos::AUX),
    ("be", Upos::AUX),
    ("been", Upos::AUX),
    ("being", Upos::AUX),
    ("do", Upos::AUX),
    ("does", Upos::AUX),
    ("did", Upos::AUX),
    ("have", Upos::AUX),
    ("has", Upos::AUX),
    ("had", Upos::AUX),
    ("will", Upos::AUX),
    ("would", Upos::AUX),
    ("can", Upos::AUX),
    ("could", Upos::AUX),
    ("should", Upos::AUX),
    ("shall", Upos::AUX),
    ("may", Upos::AUX),
    ("might", Upos::AUX),
    ("must", Upos::AUX),
    ("don't", Upos::AUX),
    ("doesn't", Upos::AUX),
    ("didn't", Upos::AUX),
    ("can't", Upos::AUX),
    ("won't", Upos::AUX),
    ("isn't", Upos::AUX),
    ("aren't", Upos::AUX),
    ("wasn't", Upos::AUX),
    ("couldn't", Upos::AUX),
    ("wouldn't", Upos::AUX),
    ("'re", Upos::AUX),
    ("'s", Upos::AUX),
    ("'m", Upos::AUX),
    // adpositions
    ("of", Upos::ADP),
    ("in", Upos::ADP),
    ("on", Upos::ADP),
    ("at", Upos::ADP),
    ("to", Upos::ADP),
    ("for", Upos::ADP),
    ("with", Upos::ADP),
    ("from", Upos::ADP),
    ("by", Upos::ADP),
    ("about", Upos::ADP),
    ("into", Upos::ADP),
    ("over", Upos::ADP),
    ("under", Upos::ADP),
    ("after", Upos::ADP),
    ("before", Upos::ADP),
    ("between", Upos::ADP),
    ("through", Upos::ADP),
    ("without", Upos::ADP),
    ("like", Upos::ADP),
    // conjunctions
    ("and", Upos::CCONJ),
    ("or", Upos::CCONJ),
    ("but", Upos::CCONJ),
    ("nor", Upos::CCONJ),
    ("yet", Upos::CCONJ),
    ("so", Upos::CCONJ),
    ("because", Upos::SCONJ),
    ("if", Upos::SCONJ),
    ("when", Upos::SCONJ),
    ("while", Upos::SCONJ),
    ("although", Upos::SCONJ),
    ("though", Upos::SCONJ),
    ("since", Upos::SCONJ),
    ("unless", Upos::SCONJ),
    ("until", Upos::SCONJ),
    ("whether", Upos::SCONJ),
    // adverbs and particles
    ("not", Upos::PART),
    ("n't", Upos::PART),
    ("why", Upos::ADV),
    ("how", Upos::ADV),
    ("where", Upos::ADV),
    ("very", Upos::ADV),
    ("too", Upos::ADV),
    ("also", Upos::ADV),
    ("just", Upos::ADV),
    ("then", Upos::ADV),
    ("now", Upos::ADV),
    ("never", Upos::ADV),
    ("always", Upos::ADV),
    ("already", Upos::ADV),
    ("still", Upos::ADV),
    ("here", Upos::ADV),
    ("there", Upos::ADV),
    ("again", Upos::ADV),
    ("however", Upos::ADV),
    ("therefore", Upos::ADV),
    ("yes", Upos::INTJ),
    ("oh", Upos::INTJ),
    ("hey", Upos::INTJ),
    ("well", Upos::INTJ),
    // a few frequent adjectives
    ("good", Upos::ADJ),
    ("bad", Upos::ADJ),
    ("big", Upos::ADJ),
    ("small", Upos::ADJ),
    ("old", Upos::ADJ),
    ("new", Upos::ADJ),
    ("long", Upos::ADJ),
    ("short", Upos::ADJ),
    ("hard", Upos::ADJ),
    ("soft", Upos::ADJ),
    ("full", Upos::ADJ),
    ("empty", Upos::ADJ),
    ("happy", Upos::ADJ),
    ("sad", Upos::ADJ),
    ("hot", Upos::ADJ),
    ("cold", Upos::ADJ),
    ("little", Upos::ADJ),
    ("great", Upos::ADJ),
    ("funny", Upos::ADJ),
    ("stupid", Upos::ADJ),
    ("dead", Upos::ADJ),
    ("black", Upos::ADJ),
    ("white", Upos::ADJ),
    ("red", Upos::ADJ),
    ("heavy", Upos::ADJ),
    ("light", Upos::ADJ),
    ("fast", Upos::ADJ),
    ("slow", Upos::ADJ),
    ("rich", Upos::ADJ),
    ("poor", Upos::ADJ),
];

/// Base forms recognised as verbs, also used to validate `-ed`/`-ing` stems.
const KNOWN_VERBS: &[&str] = &[
    "go",
    "come",
    "get",
    "make",
    "take",
    "see",
    "say",
    "tell",
    "ask",
    "know",
    "think",
    "want",
    "like",
    "love",
    "hate",
    "need",
    "give",
    "find",
    "call",
    "work",
    "try",
    "use",
    "feel",
    "leave",
    "put",
    "mean",
    "keep",
    "let",
    "begin",
    "seem",
    "help",
    "talk",
    "turn",
    "start",
    "show",
    "hear",
    "play",
    "run",
    "move",
    "live",
    "believe",
    "bring",
    "happen",
    "write",
    "sit",
    "stand",
    "lose",
    "pay",
    "meet",
    "learn",
    "change",
    "lead",
    "understand",
    "watch",
    "follow",
    "stop",
    "speak",
    "read",
    "spend",
    "grow",
    "open",
    "walk",
    "win",
    "offer",
    "remember",
    "consider",
    "appear",
    "buy",
    "wait",
    "serve",
    "die",
    "send",
    "expect",
    "visit",
    "build",
    "stay",
    "fall",
    "cut",
    "reach",
    "kill",
    "remain",
    "cross",
    "eat",
    "drink",
    "drive",
    "fly",
    "swim",
    "jump",
    "laugh",
    "cry",
    "sleep",
    "wake",
    "kiss",
    "marry",
    "cook",
    "clean",
    "wash",
    "fix",
    "break",
    "install",
    "update",
    "crash",
    "restart",
    "click",
    "load",
    "save",
    "delete",
    "download",
    "upload",
    "report",
    "close",
    "check",
    "deliver",
    "explode",
    "step",
    "catch",
    "throw",
    "hit",
    "shoot",
    "steal",
    "rob",
    "fart",
    "poop",
    "pee",
    "sing",
    "dance",
    "fight",
    "bite",
    "lick",
    "smell",
    "taste",
    "touch",
    "answer",
    "reply",
    "solve",
    "crashes",
    "says",
    "asks",
    "walks",
    "goes",
    "gets",
    "has",
    "tells",
    "wants",
    "thinks",
    "knows",
    "makes",
    "takes",
    "looks",
    "look",
    "sees",
    "said",
    "told",
    "asked",
    "went",
    "got",
    "made",
    "took",
    "saw",
    "came",
    "gave",
    "found",
    "thought",
    "knew",
    "felt",
    "left",
    "kept",
    "began",
    "brought",
    "wrote",
    "sat",
    "stood",
    "lost",
    "paid",
    "met",
    "led",
    "understood",
    "spoke",
    "spent",
    "grew",
    "won",
    "bought",
    "sent",
    "built",
    "fell",
    "ate",
    "drank",
    "drove",
    "flew",
    "swam",
    "slept",
    "woke",
    "broke",
    "caught",
    "threw",
    "shot",
    "stole",
    "sang",
    "fought",
    "bit",
    "ran",
    "heard",
];

/// Per-word POS overrides for the heuristic annotator, loaded from
/// `word<TAB>UPOS` lines.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    entries: HashMap<String, Upos>,
}

impl PosLexicon {
    pub fn builtin() -> Self {
        let mut entries: HashMap<String, Upos> = HashMap::new();
        for v in KNOWN_VERBS {
            entries.insert((*v).to_string(), Upos::VERB);
        }
        for (w, u) in CLOSED_CLASS {
            entries.insert((*w).to_string(), *u);
        }
        PosLexicon { entries }
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, AnnotateError> {
        let mut lex = PosLexicon::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line.split_once('\t').ok_or_else(|| AnnotateError::Lexicon {
                line: idx + 1,
                message: "expected word<TAB>UPOS".into(),
            })?;
            let upos = tag.trim().parse().map_err(|e: UnknownUpos| AnnotateError::Lexicon {
                line: idx + 1,
                message: e.to_string(),
            })?;
            lex.entries.insert(word.trim().to_lowercase(), upos);
        }
        Ok(lex)
    }

    /// Overlays `other` on top of `self`.
    pub fn extend(&mut self, other: PosLexicon) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, word: &str) -> Option<Upos> {
        self.entries.get(word).copied()
    }

    fn is_verb(&self, word: &str) -> bool {
        self.get(word) == Some(Upos::VERB)
    }

    fn verb_stem(&self, word: &str) -> Option<String> {
        for suffix in ["ing", "ed"] {
            let Some(stem) = word.strip_suffix(suffix) else {
                continue;
            };
            if stem.len() < 2 {
                continue;
            }
            let mut candidates = vec![stem.to_string(), format!("{stem}e")];
            let b = stem.as_bytes();
            if b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2] {
                candidates.push(stem[..stem.len() - 1].to_string());
            }
            if let Some(s) = stem.strip_suffix('i') {
                candidates.push(format!("{s}y"));
            }
            if let Some(found) = candidates.into_iter().find(|c| self.is_verb(c)) {
                return Some(found);
            }
        }
        None
    }

    fn tag(&self, surface: &str, sentence_initial: bool) -> (Upos, String, bool) {
        let lower = surface.to_lowercase();
        if is_punctuation(surface) {
            return (Upos::PUNCT, lower, false);
        }
        if surface.chars().all(|c| c.is_ascii_digit()) {
            return (Upos::NUM, lower, false);
        }
        if let Some(u) = self.get(&lower) {
            return (u, lower, false);
        }
        let capitalized = surface.chars().next().is_some_and(char::is_uppercase);
        if capitalized && !sentence_initial {
            return (Upos::PROPN, lower, true);
        }
        if let Some(stem) = self.verb_stem(&lower) {
            return (Upos::VERB, stem, false);
        }
        if lower.len() > 3 && lower.ends_with("ly") {
            return (Upos::ADV, lower, false);
        }
        (Upos::NOUN, lower, false)
    }
}

/// Heuristic single-sentence annotation over word-level, punctuation-kept tokens.
///
/// Dependency rules: the first verb is the root; the first nominal or pronoun
/// before it is `nsubj`, the first nominal after it is `dobj`; an adjective
/// directly before a noun is `amod` of that noun; everything else is `dep` of
/// the root (or of token 1 when there is no verb).
pub fn heuristic_annotate(tokens: &TokenSeq, lexicon: &PosLexicon) -> Vec<AnnotatedToken> {
    let mut out: Vec<AnnotatedToken> = tokens
        .tokens
        .iter()
        .enumerate()
        .map(|(i, surface)| {
            let (upos, lemma, is_entity) = lexicon.tag(surface, i == 0);
            AnnotatedToken {
                position: i,
                surface: surface.clone(),
                lemma,
                upos,
                deprel: "dep".into(),
                head: 0,
                is_entity,
                space_after: true,
            }
        })
        .collect();
    if out.is_empty() {
        return out;
    }
    let verb = out.iter().position(|t| t.upos == Upos::VERB);
    let root = verb.unwrap_or(0);
    let mut assigned = vec![false; out.len()];
    out[root].deprel = "root".into();
    out[root].head = 0;
    assigned[root] = true;

    if let Some(v) = verb {
        if let Some(s) = (0..v).find(|&i| matches!(out[i].upos, Upos::NOUN | Upos::PROPN | Upos::PRON)) {
            out[s].deprel = "nsubj".into();
            out[s].head = v + 1;
            assigned[s] = true;
        }
        if let Some(o) = (v + 1..out.len()).find(|&i| out[i].upos.is_nominal()) {
            out[o].deprel = "dobj".into();
            out[o].head = v + 1;
            assigned[o] = true;
        }
    }
    for i in 0..out.len().saturating_sub(1) {
        if !assigned[i] && out[i].upos == Upos::ADJ && out[i + 1].upos == Upos::NOUN {
            out[i].deprel = "amod".into();
            out[i].head = i + 2;
            assigned[i] = true;
        }
    }
    for i in 0..out.len() {
        if !assigned[i] {
            out[i].deprel = "dep".into();
            out[i].head = root + 1;
        }
    }
    out
}

fn is_sentence_end(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| matches!(c, '.' | '!' | '?'))
}

/// Cleans, splits and heuristically annotates a whole joke. Sentences break
/// after runs of `.`, `!` and `?`.
pub fn annotate_joke(joke: &Joke, lexicon: &PosLexicon) -> Result<AnnotatedJoke, AnnotateError> {
    let text = corpus::clean_text(&joke.text).map_err(|_| AnnotateError::EmptyDocument(joke.id.clone()))?;
    let tokens = corpus::tokenize(&text, Level::Word, PunctMode::Keep, false);
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for tok in tokens.tokens {
        let end = is_sentence_end(&tok);
        current.push(tok);
        if end {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    let sentences = sentences
        .into_iter()
        .map(|toks| {
            let seq = TokenSeq {
                tokens: toks,
                level: Level::Word,
                punct_mode: PunctMode::Keep,
            };
            Sentence {
                doc_id: Some(joke.id.clone()),
                sent_id: None,
                text: Some(seq.join()),
                tokens: heuristic_annotate(&seq, lexicon),
            }
        })
        .collect::<Vec<_>>();
    if sentences.is_empty() {
        return Err(AnnotateError::EmptyDocument(joke.id.clone()));
    }
    Ok(AnnotatedJoke {
        boundary: corpus::split_setup_punchline(&text),
        joke: Joke { text, ..joke.clone() },
        sentences,
        source: AnnotationSource::Heuristic,
    })
}

/// Attaches parsed CoNLL-U sentences to jokes. Sentences are matched by their
/// `newdoc id`; when a file has no document ids, sentences are consumed in
/// order, one joke per sentence.
pub fn attach_conllu(jokes: &[Joke], sentences: Vec<Sentence>) -> Result<Vec<AnnotatedJoke>, AnnotateError> {
    let has_doc_ids = sentences.iter().any(|s| s.doc_id.is_some());
    let mut by_doc: HashMap<String, Vec<Sentence>> = HashMap::new();
    let mut sequential = sentences.into_iter();
    if has_doc_ids {
        for s in sequential.by_ref() {
            by_doc.entry(s.doc_id.clone().unwrap_or_default()).or_default().push(s);
        }
    }
    let mut out = Vec::with_capacity(jokes.len());
    for joke in jokes {
        let sents = if has_doc_ids {
            by_doc.remove(&joke.id).unwrap_or_default()
        } else {
            sequential.next().into_iter().collect()
        };
        if sents.is_empty() {
            return Err(AnnotateError::EmptyDocument(joke.id.clone()));
        }
        let text = corpus::clean_text(&joke.text).unwrap_or_else(|_| joke.text.clone());
        out.push(AnnotatedJoke {
            boundary: corpus::split_setup_punchline(&text),
            joke: Joke { text, ..joke.clone() },
            sentences: sents,
            source: AnnotationSource::Conllu,
        });
    }
    Ok(out)
}
