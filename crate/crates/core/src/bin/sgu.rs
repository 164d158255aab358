use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sgu_core::decay::{stale_targets, DecayTable, DEFAULT_STALE_THRESHOLD};
use sgu_core::harness::{run_many, RunOverrides, Scenario, ScenarioError};
use sgu_core::human::{to_record, Extractor, GrammarExtractor, Lexicon};
use sgu_core::{apply, SceneGraph};

#[derive(Parser)]
#[command(name = "sgu", version, about = "Scene graph update engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and score the logged updates.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for runlog.jsonl, final_graph.json, metrics.json and metrics.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List object ids with a label in a room.
    Query {
        graph: PathBuf,
        #[arg(long)]
        room: String,
        #[arg(long)]
        label: String,
    },
    /// List objects likely to have moved since last seen.
    Stale {
        graph: PathBuf,
        #[arg(long)]
        now: f64,
        #[arg(long, default_value_t = DEFAULT_STALE_THRESHOLD)]
        threshold: f64,
    },
    /// Apply change statements read from stdin, one per line.
    Repl {
        graph: PathBuf,
        /// Timestamp given to every statement.
        #[arg(long)]
        now: Option<f64>,
        /// Where to write the updated graph on exit.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ScenarioError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, runs, seed, out } => run(&scenario, runs, seed, out.as_deref()),
        Command::Query { graph, room, label } => {
            let g = load_graph(&graph)?;
            let ids = g.find(&label, Some(&room))?;
            println!("{}", serde_json::to_string(&ids)?);
            Ok(())
        }
        Command::Stale { graph, now, threshold } => {
            anyhow::ensure!(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)");
            let g = load_graph(&graph)?;
            println!("{}", serde_json::to_string_pretty(&stale_targets(&g, now, threshold))?);
            Ok(())
        }
        Command::Repl { graph, now, save } => repl(&graph, now, save.as_deref()),
        Command::Validate { scenario } => {
            let s = Scenario::load(&scenario)?;
            println!(
                "ok: {} rooms, {} objects, {} virtual actions, {} statements, {} waypoints, mission: {}",
                s.initial.rooms().count(),
                s.initial.object_count(),
                s.file.virtual_actions.len(),
                s.file.human_statements.len(),
                s.file.trajectory.len(),
                if s.task.is_some() { "yes" } else { "no" }
            );
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<SceneGraph> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    SceneGraph::deserialize(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn run(scenario: &Path, runs: usize, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let overrides = RunOverrides {
        seed,
        ..Default::default()
    };
    let (outcomes, metrics) = run_many(scenario, &overrides, runs)?;
    let table = metrics.render();
    print!("{table}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut lines = String::new();
        for (i, o) in outcomes.iter().enumerate() {
            for e in &o.log.entries {
                let mut v = serde_json::to_value(e)?;
                v["run"] = serde_json::json!(i);
                lines.push_str(&serde_json::to_string(&v)?);
                lines.push('\n');
            }
        }
        std::fs::write(dir.join("runlog.jsonl"), lines)?;
        let last = outcomes.last().expect("at least one run");
        std::fs::write(dir.join("final_graph.json"), last.graph.serialize())?;
        std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)? + "\n")?;
        std::fs::write(dir.join("metrics.txt"), &table)?;
    }
    Ok(())
}

fn repl(path: &Path, now: Option<f64>, save: Option<&Path>) -> Result<()> {
    let mut graph = load_graph(path)?;
    let now = now.unwrap_or(graph.epoch());
    let decay = DecayTable::default();
    let extractor = GrammarExtractor::new(Lexicon::default().with_rooms(graph.rooms().map(|r| r.label.as_str())));
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let parse = extractor.extract(text);
        match to_record(&parse, now) {
            Ok(record) => {
                let report = apply(&mut graph, &record, &decay);
                writeln!(stdout, "{}", serde_json::to_string(&report)?)?;
            }
            Err(_) => writeln!(stdout, "{}", serde_json::json!({ "status": "parse_failed", "text": text }))?,
        }
    }
    if let Some(out) = save {
        std::fs::write(out, graph.serialize()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
