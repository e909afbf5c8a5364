use std::path::{Path, PathBuf};

use wishsync_cli::cli::{self, EXIT_FAIL, EXIT_OK, EXIT_USAGE};

fn wishsync(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("wishsync").chain(args.iter().copied());
    let code = cli::run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../checker/tests/corpus").join(name)
}

#[test]
fn run_then_check_good_case() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path(dir.path(), "good.jsonl");
    let (code, out) = wishsync(&["run", "--scenario", "good-case", "--seed", "7", "--out", &trace]);
    assert_eq!(code, EXIT_OK, "{out}");

    let json = path(dir.path(), "report.json");
    let (code, out) = wishsync(&["check", "--trace", &trace, "--json", &json, "--strict-premises"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("good-case"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!(report["findings"].as_array().unwrap().len() >= 10);
}

#[test]
fn check_flags_corpus_violation() {
    let trace = corpus("monotonicity-violation.jsonl");
    let (code, out) = wishsync(&["check", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code, EXIT_FAIL, "{out}");
    let line = out.lines().find(|l| l.starts_with("monotonicity ")).expect("monotonicity row");
    assert!(line.contains("FAIL"), "{line}");
}

#[test]
fn check_with_config_overrides_checks_only() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path(dir.path(), "t.jsonl");
    let cfg = path(dir.path(), "c.json");
    assert_eq!(wishsync(&["run", "--scenario", "crashed-leader", "--seed", "2", "--out", &trace]).0, EXIT_OK);

    let (code, shown) = wishsync(&["catalog", "--show", "crashed-leader", "--seed", "2"]);
    assert_eq!(code, EXIT_OK);
    let mut c: serde_json::Value = serde_json::from_str(&shown).unwrap();
    c["checks"]["properties"] = serde_json::json!(["crashed-leader"]);
    std::fs::write(&cfg, c.to_string()).unwrap();
    let (code, out) = wishsync(&["check", "--trace", &trace, "--config", &cfg]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("crashed-leader")).count(), 1);
    assert!(!out.contains("monotonicity"));

    // A config for a different run is rejected.
    c["seed"] = serde_json::json!(3);
    std::fs::write(&cfg, c.to_string()).unwrap();
    assert_eq!(wishsync(&["check", "--trace", &trace, "--config", &cfg]).0, EXIT_USAGE);
}

#[test]
fn sweep_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = path(dir.path(), "sweep.csv");
    let (code, out) = wishsync(&["sweep", "--scenario", "consensus-sync", "--seeds", "0..100", "--csv", &csv_path]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("100 of 100 seeds passed"));
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    let seeds: Vec<u64> = rd.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(seeds, (0..100).collect::<Vec<_>>());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(wishsync(&["run", "--scenario", "no-such", "--out", "/dev/null"]).0, EXIT_USAGE);
    assert_eq!(wishsync(&["sweep", "--scenario", "good-case", "--seeds", "5..5"]).0, EXIT_USAGE);
    assert_eq!(wishsync(&["check", "--trace", "/nonexistent/trace.jsonl"]).0, EXIT_USAGE);
    assert_eq!(wishsync(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(wishsync(&["run", "--out", "x.jsonl"]).0, EXIT_USAGE);
}

#[test]
fn protocol_and_horizon_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path(dir.path(), "t.jsonl");
    let args = ["run", "--scenario", "sync-chaos", "--protocol", "hotstuff-light", "--horizon", "1200", "--out", &trace];
    assert_eq!(wishsync(&args).0, EXIT_OK);
    let t = wishsync_core::Trace::parse(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(t.config().horizon, 1200);
    assert_eq!(t.config().protocol.name(), "hotstuff-light");
}
