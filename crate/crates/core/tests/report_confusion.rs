use humor_core::eval::{load_sessions, report, ConfusionMatrix, EvalRecord, Source};

#[test]
fn fixture_sessions_reproduce_the_matrix() {
    let records = load_sessions(&humor_fixtures::sessions_dir()).unwrap();
    assert_eq!(records.len(), 250);
    let r = report(&records);
    assert_eq!(r.matrix, ConfusionMatrix::new(114, 10, 18, 108));
    assert!((r.computer.recall - 0.9194).abs() < 1e-4);
    assert!((r.computer.precision - 114.0 / 132.0).abs() < 1e-12);
    assert!((r.human.precision - 0.9153).abs() < 1e-4);
    assert!((r.human.recall - 108.0 / 126.0).abs() < 1e-12);
    assert!((r.accuracy - 222.0 / 250.0).abs() < 1e-12);
    assert!(!r.notes.is_empty());
}

#[test]
fn report_ignores_record_order() {
    let mut records = load_sessions(&humor_fixtures::sessions_dir()).unwrap();
    let a = report(&records);
    records.reverse();
    records.rotate_left(37);
    assert_eq!(a, report(&records));
}

#[test]
fn single_class_session_flags_undefined_precision() {
    let records: Vec<EvalRecord> = (0..4)
        .map(|i| EvalRecord {
            evaluator: "e".into(),
            joke_id: i.to_string(),
            source: Source::Human,
            guess: Source::Human,
            ts: i,
        })
        .collect();
    let r = report(&records);
    assert_eq!(r.human.precision, 1.0);
    assert_eq!(r.computer.precision, 0.0);
    assert!(!r.computer.precision_defined);
    assert!(!r.flags.is_empty());
    assert!(r.notes.is_empty());
}
