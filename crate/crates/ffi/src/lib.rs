//! C ABI over the scene-graph update engine.
//!
//! Graphs are opaque `SguGraph` handles. Structured values cross the
//! boundary as UTF-8 JSON strings using the same schema as the Rust crate.
//! Every function returns an [`SguStatus`]; on failure a description is
//! available from [`sgu_last_error_message`] on the same thread. Strings
//! returned through out-parameters are owned by the caller and must be
//! released with [`sgu_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sgu_core::decay::{persistence_probability, stale_targets, DecayTable};
use sgu_core::harness::{run_many, RunOverrides};
use sgu_core::human::{to_record, Extractor, GrammarExtractor, Lexicon};
use sgu_core::update::{apply, ApplyStatus, UpdateRecord};
use sgu_core::SceneGraph;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SguStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or graph file.
    ParseError = 3,
    /// A primitive or query failed against the graph.
    GraphError = 4,
    /// The record was valid JSON but was not applied.
    Rejected = 5,
    /// The record was ambiguous and was held back.
    Deferred = 6,
    /// The statement could not be understood.
    StatementUnparsed = 7,
    ScenarioError = 8,
    InvalidArgument = 9,
    Panic = 255,
}

/// Opaque scene graph handle.
pub struct SguGraph {
    graph: SceneGraph,
    decay: DecayTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let c = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

type FfiResult = Result<SguStatus, (SguStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult) -> SguStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => {
            if s == SguStatus::Ok {
                set_error("");
            }
            s
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            SguStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SguStatus, String)> {
    if p.is_null() {
        return Err((SguStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (SguStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), (SguStatus, String)> {
    if out.is_null() {
        return Err((SguStatus::NullArgument, "output pointer is null".into()));
    }
    let c = CString::new(s).map_err(|e| (SguStatus::InvalidArgument, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn graph_ref<'a>(g: *const SguGraph) -> Result<&'a SguGraph, (SguStatus, String)> {
    g.as_ref().ok_or((SguStatus::NullArgument, "graph handle is null".into()))
}

unsafe fn graph_mut<'a>(g: *mut SguGraph) -> Result<&'a mut SguGraph, (SguStatus, String)> {
    g.as_mut().ok_or((SguStatus::NullArgument, "graph handle is null".into()))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("engine values serialize")
}

fn report_status(status: &ApplyStatus) -> SguStatus {
    match status {
        ApplyStatus::Applied => SguStatus::Ok,
        ApplyStatus::Rejected(_) => SguStatus::Rejected,
        ApplyStatus::Deferred(_) => SguStatus::Deferred,
    }
}

/// Text of the last error raised on this thread. Empty after a successful
/// call. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sgu_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a scene graph from JSON and stores a new handle in `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgu_graph_from_json(json: *const c_char, out: *mut *mut SguGraph) -> SguStatus {
    guard(|| {
        if out.is_null() {
            return Err((SguStatus::NullArgument, "output pointer is null".into()));
        }
        let text = read_str(json, "json")?;
        let graph = SceneGraph::deserialize(text.as_bytes()).map_err(|e| (SguStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(SguGraph {
            graph,
            decay: DecayTable::default(),
        }));
        Ok(SguStatus::Ok)
    })
}

/// Writes the graph's canonical JSON to `*out`.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgu_graph_to_json(graph: *const SguGraph, out: *mut *mut c_char) -> SguStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        let text = String::from_utf8(g.graph.serialize()).expect("serializer emits UTF-8");
        write_string(out, text)?;
        Ok(SguStatus::Ok)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sgu_graph_free(graph: *mut SguGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sgu_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Ids of attached objects with `label`, optionally limited to `room`
/// (null for all rooms), as a JSON array.
///
/// # Safety
/// `graph` must be a live handle, `label` a NUL-terminated string, `room`
/// null or NUL-terminated, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgu_graph_find(
    graph: *const SguGraph,
    label: *const c_char,
    room: *const c_char,
    out: *mut *mut c_char,
) -> SguStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        let label = read_str(label, "label")?;
        let room = if room.is_null() { None } else { Some(read_str(room, "room")?) };
        let ids = g.graph.find(label, room).map_err(|e| (SguStatus::GraphError, e.to_string()))?;
        write_string(out, to_json(&ids))?;
        Ok(SguStatus::Ok)
    })
}

/// Applies one update record given as JSON. The apply report is written to
/// `*out_report` whenever the record parsed, including when it was rejected
/// or deferred.
///
/// # Safety
/// `graph` must be a live handle, `record_json` NUL-terminated, and
/// `out_report` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgu_graph_apply_record(
    graph: *mut SguGraph,
    record_json: *const c_char,
    out_report: *mut *mut c_char,
) -> SguStatus {
    guard(|| {
        let g = graph_mut(graph)?;
        let record: UpdateRecord = serde_json::from_str(read_str(record_json, "record_json")?)
            .map_err(|e| (SguStatus::ParseError, e.to_string()))?;
        let report = apply(&mut g.graph, &record, &g.decay);
        if !out_report.is_null() {
            write_string(out_report, to_json(&report))?;
        }
        match report_status(&report.status) {
            SguStatus::Ok => Ok(SguStatus::Ok),
            s => Err((s, to_json(&report.status))),
        }
    })
}

/// Parses a natural-language change statement and applies it with
/// timestamp `now`.
///
/// # Safety
/// As for [`sgu_graph_apply_record`].
#[no_mangle]
pub unsafe extern "C" fn sgu_graph_apply_statement(
    graph: *mut SguGraph,
    text: *const c_char,
    now: f64,
    out_report: *mut *mut c_char,
) -> SguStatus {
    guard(|| {
        let g = graph_mut(graph)?;
        let text = read_str(text, "text")?;
        let lexicon = Lexicon::default().with_rooms(g.graph.rooms().map(|r| r.label.as_str()));
        let parse = GrammarExtractor::new(lexicon).extract(text);
        let record = to_record(&parse, now).map_err(|e| (SguStatus::StatementUnparsed, e.to_string()))?;
        let report = apply(&mut g.graph, &record, &g.decay);
        if !out_report.is_null() {
            write_string(out_report, to_json(&report))?;
        }
        match report_status(&report.status) {
            SguStatus::Ok => Ok(SguStatus::Ok),
            s => Err((s, to_json(&report.status))),
        }
    })
}

/// Probability that an object with `decay_rate` (1/s) last seen at
/// `last_seen` is still in place at `now`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgu_persistence_probability(decay_rate: f64, now: f64, last_seen: f64, out: *mut f64) -> SguStatus {
    guard(|| {
        if out.is_null() {
            return Err((SguStatus::NullArgument, "output pointer is null".into()));
        }
        let p = persistence_probability(decay_rate, now, last_seen)
            .map_err(|e| (SguStatus::InvalidArgument, e.to_string()))?;
        *out = p;
        Ok(SguStatus::Ok)
    })
}

/// Stale-target report as JSON.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgu_graph_stale_targets(
    graph: *const SguGraph,
    now: f64,
    threshold: f64,
    out: *mut *mut c_char,
) -> SguStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err((SguStatus::InvalidArgument, "threshold must lie in (0, 1)".into()));
        }
        write_string(out, to_json(&stale_targets(&g.graph, now, threshold)))?;
        Ok(SguStatus::Ok)
    })
}

/// Runs a scenario file `runs` times and writes the averaged metrics as
/// JSON. If `out_graph` is not null it receives a handle to the final graph
/// of the last run.
///
/// # Safety
/// `path` must be NUL-terminated, `out_metrics` a valid pointer and
/// `out_graph` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sgu_run_scenario(
    path: *const c_char,
    runs: u32,
    out_metrics: *mut *mut c_char,
    out_graph: *mut *mut SguGraph,
) -> SguStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        let (outcomes, metrics) = run_many(Path::new(path), &RunOverrides::default(), runs.max(1) as usize)
            .map_err(|e| (SguStatus::ScenarioError, e.to_string()))?;
        write_string(out_metrics, to_json(&metrics))?;
        if !out_graph.is_null() {
            let graph = outcomes.into_iter().last().map(|o| o.graph).unwrap_or_default();
            *out_graph = Box::into_raw(Box::new(SguGraph {
                graph,
                decay: DecayTable::default(),
            }));
        }
        Ok(SguStatus::Ok)
    })
}
