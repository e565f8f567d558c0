//! Experiment plumbing behind the `reflect` command: configuration, task
//! sets, backends, output files, ablation grids and report tables.

pub mod ablate;
pub mod config;
pub mod oracle;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::agent::{
    calibrate_meta_advisor, run_dataset, FewShots, Mode, Reflector, ReflectorKind, RunContext, RunError, Trace,
};
use crate::constitution::{Constitution, ConstitutionError};
use crate::env::{generate_tasks, load_tasks, make_env, seed, tasks_to_json, EnvError, TaskSpec};
use crate::llm::{Backend, CacheMode, CachedBackend, HttpBackend, LlmClient, LlmError};
use crate::metrics::RunMetrics;
use crate::reflect::{harvest_exemplars, SymbolicRulebook};

pub use ablate::{execute_ablate, AblationReport, AblationSpec};
pub use config::{BackendKind, HarnessConfig, Overrides};
pub use oracle::OracleBackend;
pub use report::{load_metrics, parse_csv, render_csv, render_markdown, report, ReportRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: metrics schema version {found:?}, expected {expected}")]
    Schema {
        path: String,
        found: Option<u64>,
        expected: u32,
    },
    #[error("{path}: {reason}")]
    Report { path: String, reason: String },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Constitution(#[from] ConstitutionError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(e: &csv::Error) -> Self {
        HarnessError::Report {
            path: "<csv>".into(),
            reason: e.to_string(),
        }
    }

    /// Bad input from the user, as opposed to an infrastructure failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::Config { .. }
                | HarnessError::Usage(_)
                | HarnessError::Run(RunError::Config(_) | RunError::Usage(_))
                | HarnessError::Run(RunError::Llm(LlmError::InvalidSettings { .. }))
        )
    }
}

impl From<LlmError> for HarnessError {
    fn from(e: LlmError) -> Self {
        HarnessError::Run(RunError::Llm(e))
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        HarnessError::Run(RunError::Env(e))
    }
}

const EVAL_LABEL: u64 = 0xE7;
const HARVEST_LABEL: u64 = 0x4A;

/// `n` tasks spread round-robin over `task_types`, on seeds derived from
/// the run seed so that every cell of a grid sees the same list.
pub fn evaluation_tasks(cfg: &HarnessConfig, run_seed: u64) -> Result<Vec<TaskSpec>, HarnessError> {
    if let Some(path) = &cfg.env.tasks_file {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let tasks = load_tasks(&text)?;
        if tasks.is_empty() {
            return Err(HarnessError::Usage(format!("{} holds no tasks", path.display())));
        }
        return Ok(tasks);
    }
    let kind = cfg.env_kind()?;
    let types = cfg.task_types()?;
    let n = cfg.env.n;
    let per_type = n.div_ceil(types.len());
    let mut lists = Vec::new();
    for (i, t) in types.iter().enumerate() {
        let s = seed::derive(seed::derive(run_seed, EVAL_LABEL), i as u64);
        lists.push(generate_tasks(kind, t, per_type, s, &cfg.env.params)?);
    }
    let mut tasks = Vec::with_capacity(n);
    for j in 0..per_type {
        for list in &lists {
            if tasks.len() < n {
                tasks.push(list[j].clone());
            }
        }
    }
    Ok(tasks)
}

/// Client over the configured backend, wrapped in the record/replay cache
/// when one is enabled. `known_tasks` feeds the oracle backend.
pub fn build_client(cfg: &HarnessConfig, known_tasks: &[TaskSpec]) -> Result<LlmClient, HarnessError> {
    let inner: Option<Arc<dyn Backend>> = match (cfg.backend.kind, cfg.backend.cache) {
        (BackendKind::Oracle, _) => Some(Arc::new(OracleBackend::new(known_tasks)?)),
        // Replay never forwards, so no endpoint is needed.
        (BackendKind::Http, CacheMode::Replay) => None,
        (BackendKind::Http, _) => Some(Arc::new(HttpBackend::new(&cfg.llm)?)),
    };
    let backend: Arc<dyn Backend> = match cfg.backend.cache {
        CacheMode::Off => inner.expect("non-replay modes build a backend"),
        mode => {
            let path = cfg.cache_file();
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            }
            Arc::new(CachedBackend::open(inner, &path, mode)?)
        }
    };
    Ok(LlmClient::new(cfg.llm.clone(), backend)?)
}

fn rulebook(cfg: &HarnessConfig) -> Result<SymbolicRulebook, HarnessError> {
    match &cfg.output.rulebook {
        Some(p) => Ok(SymbolicRulebook::load(p).map_err(RunError::from)?),
        None => Ok(SymbolicRulebook::builtin(cfg.env_kind()?)),
    }
}

/// Tasks the neuro-symbolic exemplars are harvested from: one per type,
/// disjoint from evaluation seeds.
pub fn harvest_tasks(cfg: &HarnessConfig, run_seed: u64) -> Result<Vec<TaskSpec>, HarnessError> {
    let kind = cfg.env_kind()?;
    let mut tasks = Vec::new();
    for (i, t) in cfg.task_types()?.iter().enumerate() {
        let s = seed::derive(seed::derive(run_seed, HARVEST_LABEL), i as u64);
        tasks.extend(generate_tasks(kind, t, 1, s, &cfg.env.params)?);
    }
    Ok(tasks)
}

pub fn build_reflector(cfg: &HarnessConfig, run_seed: u64) -> Result<Reflector, HarnessError> {
    Ok(match cfg.run.reflector {
        ReflectorKind::None => Reflector::None,
        ReflectorKind::Neural => Reflector::Neural,
        ReflectorKind::Symbolic => Reflector::Symbolic(rulebook(cfg)?),
        ReflectorKind::NeuroSymbolic => {
            let rb = rulebook(cfg)?;
            let tasks = harvest_tasks(cfg, run_seed)?;
            let set = harvest_exemplars(&tasks, &rb, cfg.run.exemplars_per_category).map_err(RunError::from)?;
            Reflector::NeuroSymbolic(set)
        }
    })
}

fn few_shots(cfg: &HarnessConfig, run_seed: u64) -> Result<FewShots, HarnessError> {
    if cfg.run.few_shot == 0 {
        return Ok(FewShots::none());
    }
    Ok(FewShots::generate(
        cfg.env_kind()?,
        &cfg.task_types()?,
        cfg.run.few_shot,
        run_seed,
        &cfg.env.params,
    )?)
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_metrics(path: &Path, m: &RunMetrics) -> Result<(), HarnessError> {
    write_file(
        path,
        &(serde_json::to_string_pretty(m).expect("metrics serialize") + "\n"),
    )
}

/// Files written by one run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics: RunMetrics,
    pub constitution: Constitution,
}

impl RunArtifacts {
    pub fn metrics_path(&self) -> PathBuf {
        self.dir.join("metrics.json")
    }

    pub fn trace_path(&self) -> PathBuf {
        self.dir.join("trace.jsonl")
    }

    pub fn constitution_path(&self) -> PathBuf {
        self.dir.join("constitution.json")
    }

    pub fn summary(&self) -> String {
        format!(
            "{} seed={} tasks={} SR={:.1} avg_turns={:.2} calls={} (action {}, reflection {}, summarization {}, critique {})",
            self.metrics.label,
            self.seed,
            self.metrics.tasks.len(),
            self.metrics.sr,
            self.metrics.avg_turns,
            self.metrics.llm_calls.total(),
            self.metrics.llm_calls.action,
            self.metrics.llm_calls.reflection,
            self.metrics.llm_calls.summarization,
            self.metrics.llm_calls.critique,
        )
    }
}

/// Runs the configured mode once per seed. Each run writes its trace,
/// metrics, task list and final constitution to its own directory.
pub fn execute_run(cfg: &HarnessConfig) -> Result<Vec<RunArtifacts>, HarnessError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for k in 0..cfg.output.seeds {
        let run_seed = cfg.run.seed.wrapping_add(u64::from(k));
        let dir = if cfg.output.seeds == 1 {
            cfg.output.out_dir.clone()
        } else {
            cfg.output.out_dir.join(format!("seed-{run_seed}"))
        };
        out.push(run_once(cfg, run_seed, &dir)?);
    }
    Ok(out)
}

pub(crate) fn run_once(cfg: &HarnessConfig, run_seed: u64, dir: &Path) -> Result<RunArtifacts, HarnessError> {
    create_dir(dir)?;
    let mut run_cfg = cfg.run.clone();
    run_cfg.seed = run_seed;
    let tasks = evaluation_tasks(cfg, run_seed)?;
    write_file(&dir.join("tasks.json"), &(tasks_to_json(&tasks) + "\n"))?;
    if cfg.output.dump_state {
        let mut dump = String::new();
        for t in &tasks {
            let mut env = make_env(t.env_kind);
            env.reset(t)?;
            dump.push_str(&format!("== {} ==\n{}\n\n", t.id(), env.dump_state()));
        }
        write_file(&dir.join("states.txt"), &dump)?;
    }
    let shots = if cfg.env.tasks_file.is_some() && cfg.env.kind.is_none() {
        FewShots::none()
    } else {
        few_shots(cfg, run_seed)?
    };
    let reflector = build_reflector(cfg, run_seed)?;
    let llm = build_client(cfg, &tasks)?;
    let trace_path = dir.join("trace.jsonl");
    let trace = Trace::to_file(&trace_path).map_err(|e| HarnessError::io(&trace_path, e))?;
    let mut constitution = match &cfg.output.constitution {
        Some(p) => Constitution::load(p)?,
        None => Constitution::new(tasks[0].env_kind.to_string()),
    };
    let ctx = RunContext {
        config: &run_cfg,
        llm: &llm,
        reflector: &reflector,
        few_shots: &shots,
        trace: &trace,
    };
    let mut metrics = run_dataset(ctx, &tasks, &mut constitution)?;
    trace.flush().map_err(|e| HarnessError::io(&trace_path, e))?;
    let mut resolved = cfg.clone();
    resolved.run = run_cfg.clone();
    metrics.config = serde_json::to_value(&resolved).expect("config serializes");
    metrics.config["message_layout"] = crate::llm::MESSAGE_LAYOUT.into();
    let art = RunArtifacts {
        seed: run_seed,
        dir: dir.to_path_buf(),
        metrics,
        constitution,
    };
    write_metrics(&art.metrics_path(), &art.metrics)?;
    if cfg.run.mode == Mode::SelfSustaining {
        art.constitution.save(art.constitution_path())?;
    }
    Ok(art)
}

/// Calibrates once per factor. Returns the constitution files written.
pub fn execute_calibrate(cfg: &HarnessConfig, factors: &[u32]) -> Result<Vec<PathBuf>, HarnessError> {
    cfg.validate()?;
    let kind = cfg.env_kind()?;
    let types = cfg.task_types()?;
    if factors.is_empty() {
        return Err(HarnessError::Usage("no calibration factor given".into()));
    }
    if cfg.run.reflector == ReflectorKind::None {
        return Err(HarnessError::Config {
            field: "run.reflector".into(),
            reason: "calibration needs a reflector".into(),
        });
    }
    create_dir(&cfg.output.out_dir)?;
    let mut written = Vec::new();
    for &factor in factors {
        let mut run_cfg = cfg.run.clone();
        run_cfg.mode = Mode::SelfSustaining;
        run_cfg.calibration_factor = factor;
        run_cfg.validate().map_err(RunError::from)?;
        let tasks = crate::agent::calibration_tasks(kind, &types, factor, run_cfg.seed, &cfg.env.params)?;
        let shots = few_shots(cfg, run_cfg.seed)?;
        let reflector = build_reflector(cfg, run_cfg.seed)?;
        let llm = build_client(cfg, &tasks)?;
        let stem = format!("calibration-f{factor}");
        let trace_path = cfg.output.out_dir.join(format!("{stem}.jsonl"));
        let trace = Trace::to_file(&trace_path).map_err(|e| HarnessError::io(&trace_path, e))?;
        let ctx = RunContext {
            config: &run_cfg,
            llm: &llm,
            reflector: &reflector,
            few_shots: &shots,
            trace: &trace,
        };
        let (constitution, metrics) = calibrate_meta_advisor(ctx, kind, &types, &cfg.env.params)?;
        trace.flush().map_err(|e| HarnessError::io(&trace_path, e))?;
        write_metrics(&cfg.output.out_dir.join(format!("{stem}-metrics.json")), &metrics)?;
        let path = match (&cfg.output.constitution, factors.len()) {
            (Some(p), 1) => p.clone(),
            _ => cfg.output.out_dir.join(format!("constitution-f{factor}.json")),
        };
        constitution.save(&path)?;
        written.push(path);
    }
    Ok(written)
}
