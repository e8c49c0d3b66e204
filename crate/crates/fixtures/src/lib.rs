//! Test fixtures: authored lexicons, CoNLL-U goldens, evaluation sessions,
//! seeded synthetic corpora and a stub masked-LM server. Nothing here depends
//! on the library it exercises.

mod stub;

pub use stub::{Responder, StubServer};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Directory with slang.txt, antonyms.tsv, connectives.txt, polarity.tsv and freq.txt.
pub fn lexicon_dir() -> PathBuf {
    data_dir().join("lexicons")
}

/// Gold parses for the two template rows and the chicken joke, keyed by `newdoc id`.
pub fn conllu_path() -> PathBuf {
    data_dir().join("jokes.conllu")
}

/// JSONL records matching [`conllu_path`].
pub fn jokes_path() -> PathBuf {
    data_dir().join("jokes.jsonl")
}

/// Five evaluator session files, 250 records in total, with confusion counts
/// 114/10/18/108.
pub fn sessions_dir() -> PathBuf {
    data_dir().join("sessions")
}

pub const SUBMARINE_ID: &str = "submarine";
pub const WALL_ID: &str = "wall";
pub const CHICKEN_ID: &str = "chicken";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Doc {
    pub id: String,
    pub text: String,
    /// 1 for humor, 0 for non-humor.
    pub label: u8,
}

/// One JSONL line per document in the corpus reader's format.
pub fn to_jsonl(docs: &[Doc]) -> String {
    let mut out = String::new();
    for d in docs {
        let line = serde_json::json!({ "id": d.id, "text": d.text, "label": d.label });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

const PRONOUNS: &[&str] = &["i", "you", "he", "she", "they", "we"];
const NOUNS: &[&str] = &[
    "dog", "cat", "doctor", "teacher", "wife", "husband", "computer", "car", "bar", "house", "horse", "fish", "boss",
    "friend", "pizza", "phone", "city", "school", "river", "tree", "book", "student", "baby", "ghost", "cow", "banana",
    "lawyer", "pirate", "robot", "duck",
];
const NEWS_NOUNS: &[&str] = &[
    "government",
    "minister",
    "company",
    "market",
    "budget",
    "policy",
    "report",
    "tax",
    "council",
    "committee",
    "election",
    "agreement",
    "economy",
    "official",
    "bank",
    "court",
];
const NAMES: &[&str] = &[
    "London",
    "Paris",
    "Obama",
    "Merkel",
    "Google",
    "Texas",
    "Berlin",
    "Smith",
    "Jones",
    "Microsoft",
    "Tokyo",
    "Brazil",
    "Reuters",
    "Congress",
];
const VERBS: &[&str] = &[
    "said", "told", "asked", "saw", "found", "made", "took", "gave", "got", "ate", "bought", "walked", "called",
    "kissed", "watched", "visited", "helped", "kept", "left", "broke",
];
const NEWS_VERBS: &[&str] = &[
    "said",
    "reported",
    "announced",
    "approved",
    "expected",
    "offered",
    "visited",
    "built",
    "changed",
    "reached",
    "opened",
    "closed",
    "considered",
];
const ADJECTIVES: &[&str] = &[
    "good", "great", "funny", "stupid", "little", "old", "red", "happy", "sad", "dead",
];
const NEWS_ADJECTIVES: &[&str] = &["new", "old", "big", "small", "great", "final", "local", "annual"];
const ANTONYMS: &[(&str, &str)] = &[
    ("big", "small"),
    ("hot", "cold"),
    ("rich", "poor"),
    ("happy", "sad"),
    ("good", "bad"),
    ("old", "new"),
    ("fast", "slow"),
    ("heavy", "light"),
    ("black", "white"),
];
const SLANG: &[&str] = &[
    "lol", "dude", "bro", "lmao", "yeah", "nah", "damn", "haha", "omg", "bruh",
];
const CONNECTIVES: &[&str] = &["but", "so", "because", "then", "although", "while"];

struct Style {
    pronoun: f64,
    name: f64,
    adjective: f64,
    slang: f64,
    antonym: f64,
    connective: f64,
    max_sentences: usize,
    news: bool,
}

const HUMOR: Style = Style {
    pronoun: 0.55,
    name: 0.12,
    adjective: 0.4,
    slang: 0.3,
    antonym: 0.3,
    connective: 0.45,
    max_sentences: 2,
    news: false,
};

const PLAIN: Style = Style {
    pronoun: 0.3,
    name: 0.35,
    adjective: 0.3,
    slang: 0.1,
    antonym: 0.12,
    connective: 0.3,
    max_sentences: 3,
    news: true,
};

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn noun<R: Rng>(rng: &mut R, style: &Style) -> &'static str {
    if style.news && rng.gen_bool(0.6) {
        pick(rng, NEWS_NOUNS)
    } else {
        pick(rng, NOUNS)
    }
}

fn noun_phrase<R: Rng>(rng: &mut R, style: &Style, adjective: Option<&str>, out: &mut Vec<String>) {
    if rng.gen_bool(style.name) {
        out.push(pick(rng, NAMES).to_string());
        return;
    }
    out.push(if rng.gen_bool(0.5) { "the" } else { "a" }.to_string());
    let adj = adjective.map(str::to_string).or_else(|| {
        rng.gen_bool(style.adjective).then(|| {
            let bank = if style.news { NEWS_ADJECTIVES } else { ADJECTIVES };
            pick(rng, bank).to_string()
        })
    });
    if let Some(a) = adj {
        out.push(a);
    }
    out.push(noun(rng, style).to_string());
}

fn clause<R: Rng>(rng: &mut R, style: &Style, out: &mut Vec<String>) {
    let pair = rng
        .gen_bool(style.antonym)
        .then(|| ANTONYMS[rng.gen_range(0..ANTONYMS.len())]);
    if pair.is_none() && rng.gen_bool(style.pronoun) {
        out.push(pick(rng, PRONOUNS).to_string());
    } else {
        noun_phrase(rng, style, pair.map(|p| p.0), out);
    }
    let verbs = if style.news { NEWS_VERBS } else { VERBS };
    out.push(pick(rng, verbs).to_string());
    noun_phrase(rng, style, pair.map(|p| p.1), out);
}

fn sentence<R: Rng>(rng: &mut R, style: &Style) -> String {
    let mut words = Vec::new();
    if rng.gen_bool(style.slang) {
        words.push(pick(rng, SLANG).to_string());
    }
    clause(rng, style, &mut words);
    if rng.gen_bool(style.connective) {
        words.push(pick(rng, CONNECTIVES).to_string());
        clause(rng, style, &mut words);
    }
    if rng.gen_bool(style.slang / 2.0) {
        words.push(pick(rng, SLANG).to_string());
    }
    let mut s = words.join(" ");
    if let Some(first) = s.get(0..1) {
        s.replace_range(0..1, &first.to_uppercase());
    }
    s.push_str(if style.news {
        " ."
    } else if rng.gen_bool(0.5) {
        " !"
    } else {
        " ."
    });
    s
}

fn document<R: Rng>(rng: &mut R, style: &Style) -> String {
    let n = rng.gen_range(1..=style.max_sentences);
    (0..n).map(|_| sentence(rng, style)).collect::<Vec<_>>().join(" ")
}

/// Balanced labeled corpus whose classes overlap: humor documents lean on
/// pronouns, slang, antonym pairs and connectives, the others on names and
/// institutional nouns. Order is shuffled; ids are `desk-<n>`.
pub fn desk_corpus(per_class: usize, seed: u64) -> Vec<Doc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<u8> = std::iter::repeat_n(1, per_class)
        .chain(std::iter::repeat_n(0, per_class))
        .collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let style = if label == 1 { &HUMOR } else { &PLAIN };
            Doc {
                id: format!("desk-{}", i + 1),
                text: document(&mut rng, style),
                label,
            }
        })
        .collect()
}

const RELATIVES: &[&str] = &["wife", "husband", "mom", "dad", "boss", "doctor", "friend", "teacher"];
const JOKE_VERBS: &[&str] = &[
    "eat", "find", "kiss", "fix", "watch", "cook", "steal", "call", "visit", "catch",
];
const JOKE_ADJECTIVES: &[&str] = &[
    "big", "small", "angry", "lazy", "tiny", "dead", "rich", "poor", "funny", "stupid", "old", "happy",
];

/// Lowercased one-line jokes drawn from a handful of classic shapes, for the
/// n-gram generator.
pub fn joke_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = &mut rng;
            let (a, b, c) = (pick(r, NOUNS), pick(r, NOUNS), pick(r, NOUNS));
            match r.gen_range(0..6) {
                0 => format!("why did the {a} cross the {b} ? to {} the {c} .", pick(r, JOKE_VERBS)),
                1 => format!("what do you call a {} {a} ? a {b} {c} .", pick(r, JOKE_ADJECTIVES)),
                2 => format!(
                    "i told my {} a joke about a {a} ... it was too {} .",
                    pick(r, RELATIVES),
                    pick(r, JOKE_ADJECTIVES)
                ),
                3 => format!(
                    "my {} said i was {} ... so i {} her {a} .",
                    pick(r, RELATIVES),
                    pick(r, JOKE_ADJECTIVES),
                    pick(r, JOKE_VERBS)
                ),
                4 => format!(
                    "how many {a}s does it take to {} a {b} ? {} .",
                    pick(r, JOKE_VERBS),
                    r.gen_range(2..10)
                ),
                _ => format!("knock knock . who s there ? {a} . {a} who ? {a} ate the {b} ."),
            }
        })
        .collect()
}

/// Three small corpora of different shapes for count oracles.
pub fn markov_corpora() -> [Vec<&'static str>; 3] {
    [
        vec!["a b a b a c", "b a b c c a", "a a a b"],
        vec![
            "i found waldo ... he's mexican now.",
            "why did the chicken cross the road ?",
            "the chicken crossed the road to get to the other side .",
            "of the world of the world",
        ],
        vec![
            "knock knock . who s there ? lettuce .",
            "lettuce who ? lettuce in , it s cold out here .",
            "what do you call a fish with no eyes ? a fsh .",
            "x",
        ],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_corpus_is_balanced_and_seeded() {
        let a = desk_corpus(50, 3);
        assert_eq!(a.len(), 100);
        assert_eq!(a.iter().filter(|d| d.label == 1).count(), 50);
        assert_eq!(a, desk_corpus(50, 3));
        assert_ne!(a, desk_corpus(50, 4));
        assert!(a.iter().all(|d| !d.text.is_empty()));
    }

    #[test]
    fn joke_corpus_is_seeded() {
        let a = joke_corpus(20, 1);
        assert_eq!(a, joke_corpus(20, 1));
        assert!(a.iter().all(|j| j == &j.to_lowercase()));
    }

    #[test]
    fn data_files_exist() {
        for p in [conllu_path(), jokes_path(), lexicon_dir().join("freq.txt")] {
            assert!(p.is_file(), "{}", p.display());
        }
        assert_eq!(std::fs::read_dir(sessions_dir()).unwrap().count(), 5);
    }

    #[test]
    fn jsonl_escapes_text() {
        let docs = [Doc {
            id: "1".into(),
            text: "say \"hi\"".into(),
            label: 1,
        }];
        assert_eq!(
            to_jsonl(&docs),
            "{\"id\":\"1\",\"label\":1,\"text\":\"say \\\"hi\\\"\"}\n"
        );
    }
}
