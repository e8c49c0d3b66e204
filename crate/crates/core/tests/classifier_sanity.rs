mod common;

use common::fixture_lexicons;
use humor_core::annotate::{annotate_joke, PosLexicon};
use humor_core::classify::{evaluate, train, Dataset, ModelKind, TrainConfig};
use humor_core::corpus::Joke;
use humor_core::features::{feature_rows, FEATURE_NAMES};

fn desk_dataset(per_class: usize, seed: u64) -> Dataset {
    let pos = PosLexicon::builtin();
    let docs: Vec<_> = humor_fixtures::desk_corpus(per_class, seed)
        .into_iter()
        .map(|d| annotate_joke(&Joke::new(d.id, d.text).with_label(d.label), &pos).unwrap())
        .collect();
    let rows = feature_rows(&docs, &fixture_lexicons()).unwrap();
    let y = rows.iter().map(|r| r.label.unwrap()).collect();
    let x = rows.iter().map(|r| r.features.to_vec()).collect();
    Dataset::new(x, y, FEATURE_NAMES.iter().map(|s| s.to_string()).collect()).unwrap()
}

#[test]
fn svm_beats_majority_and_tracks_gnb() {
    let data = desk_dataset(1000, 11);
    let (train_set, test_set) = data.stratified_split(0.2, 11);
    let cfg = TrainConfig::default();
    let svm = train(ModelKind::Svm, &train_set, &cfg).unwrap();
    let gnb = train(ModelKind::Gnb, &train_set, &cfg).unwrap();
    let logreg = train(ModelKind::Logreg, &train_set, &cfg).unwrap();
    let s = evaluate(&svm, &test_set).unwrap();
    let g = evaluate(&gnb, &test_set).unwrap();
    let l = evaluate(&logreg, &test_set).unwrap();
    eprintln!("svm {s:?}\ngnb {g:?}\nlogreg {l:?}");
    assert!(s.accuracy >= 0.55, "svm accuracy {}", s.accuracy);
    assert!(s.f1 >= g.f1 - 0.05, "svm f1 {} gnb f1 {}", s.f1, g.f1);
    assert!(l.accuracy >= 0.55);
}
