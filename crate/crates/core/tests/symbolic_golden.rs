//! Symbolic reflection over a fixed corpus of trajectories, compared byte
//! for byte with checked-in expected batches.
//!
//! `corpus.json` lists the hand-written action sequences. Running the
//! ignored `regenerate` test replays them into fixture files and rewrites
//! the expected batches; review the diff before committing.

use std::fs;
use std::path::{Path, PathBuf};

use reflect_core::env::{generate_tasks, make_env, EnvKind, TaskParams, TaskSpec};
use reflect_core::reflect::{symbolic_reflect, SymbolicRulebook};
use reflect_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};

#[derive(Deserialize)]
struct CorpusEntry {
    name: String,
    env: EnvKind,
    task_type: String,
    gen_seed: u64,
    actions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Fixture {
    task: TaskSpec,
    trajectory: Trajectory,
}

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/symbolic")
}

fn fixtures() -> Vec<(String, Fixture, String)> {
    let mut out = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".trajectory.json"))
        .collect();
    names.sort();
    for p in names {
        let name = p.file_name().unwrap().to_string_lossy().replace(".trajectory.json", "");
        let fixture: Fixture = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        let golden = fs::read_to_string(dir().join(format!("{name}.batch.json"))).unwrap();
        out.push((name, fixture, golden));
    }
    out
}

fn analyze(f: &Fixture) -> String {
    let rb = SymbolicRulebook::builtin(f.task.env_kind);
    let batch = symbolic_reflect(&f.task, &f.trajectory, &rb).unwrap();
    serde_json::to_string_pretty(&batch).unwrap() + "\n"
}

#[test]
fn corpus_matches_goldens() {
    let all = fixtures();
    assert!(all.len() >= 10, "corpus has {} entries", all.len());
    let kinds: std::collections::BTreeSet<String> = all.iter().map(|(_, f, _)| f.task.env_kind.to_string()).collect();
    assert_eq!(kinds.len(), 3);
    for (name, fixture, golden) in &all {
        assert_eq!(&analyze(fixture), golden, "golden mismatch for {name}");
    }
}

#[test]
#[ignore = "rewrites the golden files"]
fn regenerate() {
    let corpus: Vec<CorpusEntry> =
        serde_json::from_str(&fs::read_to_string(dir().join("corpus.json")).unwrap()).unwrap();
    for entry in corpus {
        let task = generate_tasks(entry.env, &entry.task_type, 1, entry.gen_seed, &TaskParams::default())
            .unwrap()
            .remove(0);
        let mut env = make_env(task.env_kind);
        let mut trajectory = Trajectory::new(env.reset(&task).unwrap().observation);
        for a in entry.actions {
            let r = env.step(&a).unwrap();
            trajectory.push(a, r.observation);
        }
        let fixture = Fixture { task, trajectory };
        let text = serde_json::to_string_pretty(&fixture).unwrap() + "\n";
        fs::write(dir().join(format!("{}.trajectory.json", entry.name)), text).unwrap();
        fs::write(dir().join(format!("{}.batch.json", entry.name)), analyze(&fixture)).unwrap();
    }
}
