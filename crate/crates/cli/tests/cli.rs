use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scorecheck"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn score_eval_reproduces_the_mixed_table() {
    let f = fixture("ctrex1.json");
    let out = run(&["score-eval", "--preset", "eth", "--counters", path_str(&f), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["peers"]["q"]["total"], "8.3116456");
    assert_eq!(v["peers"]["q"]["topics"]["AGG"], "-4.5036");
    assert_eq!(v["peers"]["q"]["topics"]["SUB2"], "-24.7380936");
    assert!(v["fingerprint"].as_str().is_some_and(|s| s.len() == 16));
}

#[test]
fn score_eval_shows_the_cap_hiding_a_drop() {
    let f = fixture("ctrex3.json");
    let v = json(&run(&["score-eval", "--counters", path_str(&f), "--json"]));
    assert_eq!(v["peers"]["q"]["total"], "32.72");
    assert_eq!(v["peers"]["q2"]["total"], "32.72");
    assert_eq!(v["peers"]["q2"]["topics"]["BLOCKS"], "6.21024");
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let eth = run(&["check", "--property", "1", "--preset", "eth", "--budget", "100000", "--seed", "7", "--json"]);
    assert_eq!(eth.status.code(), Some(1));
    let v = json(&eth);
    assert_eq!(v["seed"], 7);
    assert!(v["counterexample"].is_object());

    let fc = run(&["check", "--property", "1", "--preset", "filecoin", "--budget", "100000", "--seed", "7", "--json"]);
    assert_eq!(fc.status.code(), Some(0));
    assert!(json(&fc)["counterexample"].is_null());
}

#[test]
fn check_single_snapshot() {
    let f = fixture("ctrex1.json");
    let out = run(&["check", "--property", "1", "--counters", path_str(&f), "--peer", "q", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["counterexample"]["scores"]["total"], "8.3116456");
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(run(&["check", "--property", "9"]).status.code(), Some(2));
    assert_eq!(run(&["score-eval", "--counters", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"global\": ").unwrap();
    assert_eq!(run(&["check", "--property", "2", "--config", path_str(&bad)]).status.code(), Some(2));
}

#[test]
fn json_output_is_byte_identical() {
    let args = ["check", "--property", "2", "--preset", "eth", "--budget", "5000", "--seed", "3", "--json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn synthesized_block_script_runs_and_violates() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("block.json");
    let tri = fixture("triangle.txt");
    let synth = run(&[
        "attack-synth", "--kind", "block", "--attacker", "A", "--victim", "V", "--topology", path_str(&tri),
        "--rounds", "30", "--out", path_str(&script),
    ]);
    assert_eq!(synth.status.code(), Some(0), "{}", String::from_utf8_lossy(&synth.stderr));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&script).unwrap()).unwrap();
    assert_eq!(s["kind"], "block");
    assert_eq!(s["b"], 0);

    let trace = dir.path().join("trace.ndjson");
    let out = run(&[
        "attack-run", "--script", path_str(&script), "--topology", path_str(&tri), "--trace", path_str(&trace), "--json",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["report"]["gadgets"][0]["verdict"]["verdict"], "violation");
    assert_eq!(v["report"]["caches"][0]["passed"], true);

    // the recorded trace can be checked on its own
    let chk = run(&[
        "check", "--property", "1", "--trace", path_str(&trace), "--victim", "V", "--attacker", "A", "--topic", "SUB1",
    ]);
    assert_eq!(chk.status.code(), Some(1));

    // a script planned for another config is refused
    let wrong = run(&["attack-run", "--script", path_str(&script), "--topology", path_str(&tri), "--preset", "eth"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn partition_synthesis_reports_the_cut() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("path.txt");
    std::fs::write(&topo, "a b\nb c\n").unwrap();
    let out = run(&[
        "attack-synth", "--kind", "partition", "--topology", path_str(&topo), "--victims", "a", "--subnets", "3",
        "--rounds", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["cut"], serde_json::json!(["b"]));
    assert_eq!(v["gadgets"].as_array().unwrap().len(), 2);
}

#[test]
fn topology_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let gen = run(&["topology", "gen", "--nodes", "40", "--avg-degree", "6", "--seed", "2", "--out", path_str(&g)]);
    assert_eq!(gen.status.code(), Some(0));
    let v = json(&run(&["topology", "stats", path_str(&g), "--json"]));
    assert_eq!(v["nodes"], 40);
    assert_eq!(v["components"], 1);
    let loaded = run(&["topology", "load", path_str(&g)]);
    assert_eq!(loaded.stdout, std::fs::read(&g).unwrap());
}

#[test]
fn simulate_records_a_conserving_trace() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.json");
    std::fs::write(&events, r#"[{"verb": "APP", "peer": "A", "topic": "BLOCKS", "mid": 7}]"#).unwrap();
    let trace = dir.path().join("t.ndjson");
    let tri = fixture("triangle.txt");
    let out = run(&[
        "simulate", "--topology", path_str(&tri), "--events", path_str(&events), "--heartbeats", "2", "--seed", "4",
        "--trace", path_str(&trace), "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["conservation"], true);
    assert_eq!(v["seed"], 4);
    assert_eq!(v["peers"]["V"]["seen"], 1);
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() > 3);
}
