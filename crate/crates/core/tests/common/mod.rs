#![allow(dead_code)]

use humor_core::annotate::{attach_conllu, read_conllu_file, AnnotatedJoke};
use humor_core::corpus::{load_corpus, CorpusFormat};
use humor_core::lexicons::LexiconSet;

pub fn fixture_lexicons() -> LexiconSet {
    LexiconSet::load_dir(&humor_fixtures::lexicon_dir()).unwrap()
}

pub fn fixture_docs() -> Vec<AnnotatedJoke> {
    let jokes = load_corpus(&humor_fixtures::jokes_path(), CorpusFormat::Jsonl).unwrap();
    let sentences = read_conllu_file(&humor_fixtures::conllu_path()).unwrap();
    attach_conllu(&jokes, sentences).unwrap()
}

pub fn fixture_doc(id: &str) -> AnnotatedJoke {
    fixture_docs().into_iter().find(|d| d.joke.id == id).unwrap()
}
