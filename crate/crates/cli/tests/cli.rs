use serde_json::Value;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_humor"))
        .args(args)
        .env_remove("HUMOR_MLM_URL")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn humor(args: &[&str]) -> Output {
    run(args, "")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let o = humor(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_1() {
    let o = humor(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_flag_value_exits_1() {
    let o = humor(&["markov-train", "--in", "x.jsonl", "--level", "syllable"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_input_file_exits_2() {
    let o = humor(&["ingest", "--in", "/nonexistent/jokes.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_corpus_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"id\": 1, \"text\": \n").unwrap();
    assert_eq!(humor(&["ingest", "--in", s(&path)]).status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    assert_eq!(humor(&["--help"]).status.code(), Some(0));
    assert_eq!(humor(&["report", "--help"]).status.code(), Some(0));
}

#[test]
fn ingest_splits_setup_and_punchline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"1\",\"text\":\"i found waldo ... he's mexican now.\"}\n",
    )
    .unwrap();
    let o = humor(&["ingest", "--in", s(&path)]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["setup"], "i found waldo");
    assert_eq!(v["punchline"], "he's mexican now.");
    assert_eq!(v["split_rule"], "ellipsis");
}

#[test]
fn config_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    std::fs::write(&corpus, "{\"id\":\"1\",\"text\":\"a b c d e\"}\n").unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 4, "level": "char"}"#).unwrap();

    let from_config = dir.path().join("m1.json");
    let o = humor(&[
        "markov-train",
        "--in",
        s(&corpus),
        "--config",
        s(&cfg),
        "--out",
        s(&from_config),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&from_config).unwrap()).unwrap();
    assert_eq!((m["n"].as_u64(), m["level"].as_str()), (Some(4), Some("char")));

    let overridden = dir.path().join("m2.json");
    let o = humor(&[
        "markov-train",
        "--in",
        s(&corpus),
        "--config",
        s(&cfg),
        "--n",
        "2",
        "--out",
        s(&overridden),
    ]);
    assert!(o.status.success());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&overridden).unwrap()).unwrap();
    assert_eq!(m["n"].as_u64(), Some(2));

    std::fs::write(&cfg, r#"{"no_such_flag": 1}"#).unwrap();
    assert_eq!(
        humor(&["markov-train", "--in", s(&corpus), "--config", s(&cfg)])
            .status
            .code(),
        Some(1)
    );
    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(
        humor(&["markov-train", "--in", s(&corpus), "--config", s(&cfg)])
            .status
            .code(),
        Some(2)
    );
}

fn pools(dir: &Path) -> (String, String) {
    let human = dir.join("human.jsonl");
    let generated = dir.join("generated.jsonl");
    let lines = |prefix: &str, n: usize| {
        (0..n)
            .map(|i| format!("{{\"id\":\"{prefix}{i}\",\"text\":\"joke number {i} from pool {prefix}\"}}\n"))
            .collect::<String>()
    };
    std::fs::write(&human, lines("a", 6)).unwrap();
    std::fs::write(&generated, lines("b", 6)).unwrap();
    (s(&human).to_string(), s(&generated).to_string())
}

#[test]
fn blind_session_hides_sources_and_persists_records() {
    let dir = tempfile::tempdir().unwrap();
    let (human, generated) = pools(dir.path());
    let results = dir.path().join("results");
    let o = run(
        &[
            "eval-blind",
            "--human",
            &human,
            "--generated",
            &generated,
            "--n-items",
            "4",
            "--evaluator",
            "ann",
            "--seed",
            "3",
            "--out",
            s(&results),
        ],
        "h\nx\nc\nh\nc\n",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let terminal = stdout(&o);
    assert_eq!(
        terminal.matches("Who wrote this?").count(),
        5,
        "invalid answer is re-prompted"
    );
    let shown = terminal.replace("Please answer h (human) or c (computer).", "");
    assert!(!shown.contains("human") && !shown.contains("computer"), "{shown}");
    let records = std::fs::read_to_string(results.join("ann.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 4);

    let report = humor(&["report", "--sessions", s(&results), "--json"]);
    let v: Value = serde_json::from_str(&stdout(&report)).unwrap();
    let m = &v["matrix"];
    let total: u64 = [
        "computer_as_computer",
        "computer_as_human",
        "human_as_computer",
        "human_as_human",
    ]
    .iter()
    .map(|k| m[*k].as_u64().unwrap())
    .sum();
    assert_eq!(total, 4);
}

#[test]
fn interrupted_session_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let (human, generated) = pools(dir.path());
    let results = dir.path().join("results");
    let args = [
        "eval-blind",
        "--human",
        &human,
        "--generated",
        &generated,
        "--n-items",
        "5",
        "--evaluator",
        "bo",
        "--out",
        s(&results),
    ];
    let first = run(&args, "h\nc\n");
    assert!(first.status.success());
    assert!(String::from_utf8_lossy(&first.stderr).contains("paused"));
    let second = run(&args, "c\nc\nh\n");
    assert!(second.status.success());
    assert_eq!(stdout(&second).matches("Who wrote this?").count(), 3);
    let records = std::fs::read_to_string(results.join("bo.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 5);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(results.join("bo.session.json")).unwrap()).unwrap();
    assert_eq!(meta["resumable"], false);
}

#[test]
fn empty_session_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (human, generated) = pools(dir.path());
    let o = humor(&[
        "eval-blind",
        "--human",
        &human,
        "--generated",
        &generated,
        "--n-items",
        "0",
        "--evaluator",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn remote_infiller_without_endpoint_is_a_usage_error() {
    let lex = humor_fixtures::lexicon_dir();
    let o = humor(&[
        "generate",
        "--in",
        s(&humor_fixtures::jokes_path()),
        "--lexicons",
        s(&lex),
        "--infiller",
        "remote",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreachable_remote_is_a_data_error_naming_the_mask() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let o = humor(&[
        "generate",
        "--in",
        s(&humor_fixtures::jokes_path()),
        "--conllu",
        s(&humor_fixtures::conllu_path()),
        "--lexicons",
        s(&humor_fixtures::lexicon_dir()),
        "--infiller",
        "remote",
        "--url",
        &url,
        "--timeout-secs",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mask 0"));
}

#[test]
fn features_then_classify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("desk.jsonl");
    std::fs::write(&corpus, humor_fixtures::to_jsonl(&humor_fixtures::desk_corpus(60, 5))).unwrap();
    let feats = dir.path().join("f");
    let lex = humor_fixtures::lexicon_dir();
    assert!(humor(&[
        "features",
        "--in",
        s(&corpus),
        "--lexicons",
        s(&lex),
        "--out",
        s(&feats)
    ])
    .status
    .success());
    let header = std::fs::read_to_string(feats.join("features.csv")).unwrap();
    assert!(header.starts_with("id,label,ratio_verb"));
    let model = dir.path().join("gnb.json");
    let table = feats.join("features.csv");
    let o = humor(&["train", "--features", s(&table), "--model", "gnb", "--out", s(&model)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = humor(&["classify", "--model", s(&model), "--features", s(&table)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 121);
    assert!(text.starts_with("id,label,score\n"));
}

#[test]
fn lstm_gen_reports_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    std::fs::write(
        &corpus,
        "{\"id\":\"1\",\"text\":\"of the world of the world of the world\"}\n",
    )
    .unwrap();
    let model = dir.path().join("lm.json");
    let o = humor(&[
        "lstm-train",
        "--in",
        s(&corpus),
        "--epochs",
        "200",
        "--dropout",
        "0",
        "--embed-dim",
        "8",
        "--hidden-dim",
        "16",
        "--out",
        s(&model),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = humor(&[
        "lstm-gen",
        "--model",
        s(&model),
        "--prompt",
        "of the world",
        "--temperature",
        "0",
        "--count",
        "1",
        "--max-tokens",
        "6",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["text"].as_str().unwrap().starts_with("of the world"));
    assert!(v.get("trailing_cycle").is_some());
}

#[test]
fn closed_stdout_is_not_an_error() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_humor"))
        .args(["report", "--sessions", s(&humor_fixtures::sessions_dir())])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
