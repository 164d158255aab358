use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use sgu_core::decay::DecayTable;
use sgu_core::sim::{House, DEFAULT_HOUSE_JSON};
use sgu_core::update::{Action, Provenance};
use sgu_core::{SceneGraph, UpdateRecord};
use sgu_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    sgu_string_free(s);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sgu_last_error_message()).to_str().unwrap().to_string() }
}

fn house_graph() -> SceneGraph {
    House::from_json(DEFAULT_HOUSE_JSON)
        .unwrap()
        .to_graph(&DecayTable::default(), 0.0)
        .unwrap()
}

unsafe fn load(g: &SceneGraph) -> *mut SguGraph {
    let json = c(std::str::from_utf8(&g.serialize()).unwrap());
    let mut h = ptr::null_mut();
    assert_eq!(sgu_graph_from_json(json.as_ptr(), &mut h), SguStatus::Ok);
    h
}

fn scenario(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/scenarios").join(name);
    c(p.to_str().unwrap())
}

#[test]
fn graph_round_trip_is_byte_stable() {
    let g = house_graph();
    unsafe {
        let h = load(&g);
        let mut out = ptr::null_mut();
        assert_eq!(sgu_graph_to_json(h, &mut out), SguStatus::Ok);
        assert_eq!(take(out).as_bytes(), &g.serialize()[..]);
        sgu_graph_free(h);
    }
}

#[test]
fn find_with_and_without_room() {
    let g = house_graph();
    let expected = g.find("mug", Some("kitchen")).unwrap();
    unsafe {
        let h = load(&g);
        let mut out = ptr::null_mut();
        assert_eq!(sgu_graph_find(h, c("mug").as_ptr(), c("kitchen").as_ptr(), &mut out), SguStatus::Ok);
        let ids: Vec<String> = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(ids, expected.iter().map(|i| i.to_string()).collect::<Vec<_>>());
        assert_eq!(ids.len(), 1);

        assert_eq!(sgu_graph_find(h, c("mug").as_ptr(), ptr::null(), &mut out), SguStatus::Ok);
        let all: Vec<String> = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(all, ids);

        assert_eq!(sgu_graph_find(h, c("mug").as_ptr(), c("garage").as_ptr(), &mut out), SguStatus::GraphError);
        assert!(!last_error().is_empty());
        sgu_graph_free(h);
    }
}

#[test]
fn apply_record_applied_and_rejected() {
    let g = house_graph();
    unsafe {
        let h = load(&g);
        let mut rec = UpdateRecord::new(Action::Removed, "towel", Provenance::Human, 1.0);
        rec.source_room = Some("bathroom".into());
        let json = c(&serde_json::to_string(&rec).unwrap());

        let mut report = ptr::null_mut();
        assert_eq!(sgu_graph_apply_record(h, json.as_ptr(), &mut report), SguStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(v["status"], "applied");
        assert_eq!(last_error(), "");

        let mut out = ptr::null_mut();
        sgu_graph_find(h, c("towel").as_ptr(), ptr::null(), &mut out);
        assert_eq!(take(out), "[]");

        assert_eq!(sgu_graph_apply_record(h, json.as_ptr(), &mut report), SguStatus::Rejected);
        let v: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(v["status"], "rejected");
        assert!(!last_error().is_empty());
        sgu_graph_free(h);
    }
}

#[test]
fn apply_statement() {
    let g = house_graph();
    unsafe {
        let h = load(&g);
        let text = c("I removed the towel from the bathroom because it was too old.");
        let mut report = ptr::null_mut();
        assert_eq!(sgu_graph_apply_statement(h, text.as_ptr(), 2.0, &mut report), SguStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(v["status"], "applied");

        let gibberish = c("the weather is nice today");
        assert_eq!(
            sgu_graph_apply_statement(h, gibberish.as_ptr(), 3.0, ptr::null_mut()),
            SguStatus::StatementUnparsed
        );
        sgu_graph_free(h);
    }
}

#[test]
fn malformed_inputs() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(sgu_graph_from_json(c("{\"rooms\": [").as_ptr(), &mut h), SguStatus::ParseError);
        assert!(h.is_null());
        assert!(last_error().contains("line"), "{}", last_error());

        assert_eq!(sgu_graph_from_json(ptr::null(), &mut h), SguStatus::NullArgument);
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(sgu_graph_from_json(bad.as_ptr().cast(), &mut h), SguStatus::InvalidUtf8);

        let g = load(&house_graph());
        assert_eq!(sgu_graph_apply_record(g, c("{}").as_ptr(), ptr::null_mut()), SguStatus::ParseError);
        let mut out = ptr::null_mut();
        assert_eq!(sgu_graph_to_json(ptr::null(), &mut out), SguStatus::NullArgument);
        assert_eq!(sgu_graph_to_json(g, ptr::null_mut()), SguStatus::NullArgument);
        sgu_graph_free(g);
        sgu_graph_free(ptr::null_mut());
        sgu_string_free(ptr::null_mut());
    }
}

#[test]
fn persistence_and_stale() {
    unsafe {
        let mut p = 0.0;
        assert_eq!(sgu_persistence_probability(1.0, 3f64.ln(), 0.0, &mut p), SguStatus::Ok);
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(sgu_persistence_probability(1.0, 0.0, 1.0, &mut p), SguStatus::InvalidArgument);
        assert_eq!(sgu_persistence_probability(-1.0, 1.0, 0.0, &mut p), SguStatus::InvalidArgument);
        assert_eq!(sgu_persistence_probability(1.0, 1.0, 0.0, ptr::null_mut()), SguStatus::NullArgument);

        let h = load(&house_graph());
        let mut out = ptr::null_mut();
        assert_eq!(sgu_graph_stale_targets(h, 0.0, 0.5, &mut out), SguStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["entries"].as_array().unwrap().len(), 0);

        assert_eq!(sgu_graph_stale_targets(h, 1e7, 0.5, &mut out), SguStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert!(!v["entries"].as_array().unwrap().is_empty());

        assert_eq!(sgu_graph_stale_targets(h, 0.0, 1.5, &mut out), SguStatus::InvalidArgument);
        sgu_graph_free(h);
    }
}

#[test]
fn run_scenario_returns_metrics_and_graph() {
    unsafe {
        let mut metrics = ptr::null_mut();
        let mut graph = ptr::null_mut();
        let path = scenario("house_ideal.json");
        assert_eq!(sgu_run_scenario(path.as_ptr(), 1, &mut metrics, &mut graph), SguStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(metrics)).unwrap();
        assert_eq!(v["runs"], 1);
        assert!(!graph.is_null());

        let mut out = ptr::null_mut();
        sgu_graph_find(graph, c("mug").as_ptr(), c("bedroom").as_ptr(), &mut out);
        let ids: Vec<String> = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(ids.len(), 1);
        sgu_graph_free(graph);

        let missing = c("/nonexistent/scenario.json");
        assert_eq!(
            sgu_run_scenario(missing.as_ptr(), 1, &mut metrics, ptr::null_mut()),
            SguStatus::ScenarioError
        );
        assert!(last_error().contains("nonexistent"));
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/sgu.h")).unwrap();
    for name in [
        "typedef struct SguGraph SguGraph",
        "SGU_STATUS_OK = 0",
        "SGU_STATUS_PANIC = 255",
        "sgu_last_error_message",
        "sgu_graph_from_json",
        "sgu_graph_to_json",
        "sgu_graph_free",
        "sgu_string_free",
        "sgu_graph_find",
        "sgu_graph_apply_record",
        "sgu_graph_apply_statement",
        "sgu_persistence_probability",
        "sgu_graph_stale_targets",
        "sgu_run_scenario",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Test binaries live in target/<profile>/deps; the static library sits one level up.
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = lib_dir.join("libsgu_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let out = std::env::temp_dir().join(format!("sgu_smoke_{}", std::process::id()));
    let status = std::process::Command::new(cc)
        .arg(dir.join("examples/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = std::process::Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "smoke exited with {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.contains("\"rooms\": []"), "{text}");
}
