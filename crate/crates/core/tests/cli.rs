mod common;

use std::io::Write;
use std::process::{Command, Stdio};

use common::scenario;

fn sgu() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgu"))
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = sgu()
        .args(["run", scenario("house_small_object_miss.json").to_str().unwrap(), "--runs", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("Remove      66.67%"), "{table}");
    for f in ["runlog.jsonl", "final_graph.json", "metrics.json", "metrics.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["runs"], 3);
    let log = std::fs::read_to_string(dir.path().join("runlog.jsonl")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn query_stale_and_repl() {
    let dir = tempfile::tempdir().unwrap();
    let st = sgu()
        .args(["run", scenario("house_ideal.json").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(st.status.success());
    let graph = dir.path().join("final_graph.json");

    let out = sgu().args(["query"]).arg(&graph).args(["--room", "bedroom", "--label", "mug"]).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), r#"["mug-1"]"#);

    let out = sgu().args(["stale"]).arg(&graph).args(["--now", "51", "--threshold", "0.5"]).output().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["entries"].as_array().unwrap().len(), 0);

    let saved = dir.path().join("after.json");
    let mut child = sgu()
        .args(["repl"])
        .arg(&graph)
        .args(["--now", "60", "--save"])
        .arg(&saved)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"I threw away the book from the bedroom\nnonsense\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["status"], "applied");
    assert_eq!(lines[1]["status"], "parse_failed");
    let out = sgu().args(["query"]).arg(&saved).args(["--room", "bedroom", "--label", "book"]).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "[]");
}

#[test]
fn exit_codes() {
    let ok = sgu().args(["validate", scenario("house_ideal.json").to_str().unwrap()]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{}").unwrap();
    let out = sgu().args(["validate"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = sgu().args(["query"]).arg(&bad).args(["--room", "x", "--label", "y"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
