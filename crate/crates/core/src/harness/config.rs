use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{Mode, ReflectorKind, RunConfig};
use crate::env::{EnvKind, TaskParams};
use crate::llm::{CacheMode, LlmSettings};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Chat-completions endpoint.
    #[default]
    Http,
    /// Built-in planner; needs no endpoint.
    Oracle,
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "http" => Ok(BackendKind::Http),
            "oracle" => Ok(BackendKind::Oracle),
            other => Err(format!("unknown llm backend `{other}` (expected http|oracle)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub kind: Option<EnvKind>,
    /// Empty means every task type of the kind.
    pub task_types: Vec<String>,
    pub n: usize,
    /// JSON task list used instead of generated tasks.
    pub tasks_file: Option<PathBuf>,
    pub params: TaskParams,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            kind: None,
            task_types: Vec::new(),
            n: 20,
            tasks_file: None,
            params: TaskParams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub cache: CacheMode,
    /// Defaults to `cache.jsonl` in the output directory.
    pub cache_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub out_dir: PathBuf,
    /// Constitution to start from; required in cooperative mode.
    pub constitution: Option<PathBuf>,
    /// Rulebook overriding the built-in one for the symbolic reflectors.
    pub rulebook: Option<PathBuf>,
    pub dump_state: bool,
    /// Consecutive run seeds, starting at `run.seed`.
    pub seeds: u32,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs"),
            constitution: None,
            rulebook: None,
            dump_state: false,
            seeds: 1,
        }
    }
}

/// Everything a harness command needs, as read from a TOML file and then
/// overridden by command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub run: RunConfig,
    pub env: EnvSection,
    pub llm: LlmSettings,
    pub backend: BackendSection,
    pub output: OutputSection,
}

/// Command-line values; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub reflector: Option<ReflectorKind>,
    pub env: Option<EnvKind>,
    pub task_types: Option<Vec<String>>,
    pub n: Option<usize>,
    pub r_freq: Option<u32>,
    pub s_freq: Option<u32>,
    pub max_turns: Option<u32>,
    pub trials: Option<u32>,
    pub calibration_factor: Option<u32>,
    pub few_shot: Option<usize>,
    pub constitution: Option<PathBuf>,
    pub rulebook: Option<PathBuf>,
    pub tasks_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub seeds: Option<u32>,
    pub llm_endpoint: Option<String>,
    pub llm_model: Option<String>,
    pub backend: Option<BackendKind>,
    pub cache: Option<CacheMode>,
    pub cache_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub dump_state: bool,
}

fn config_error(field: impl Into<String>, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("<file>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            config_error(field, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *dst = v.clone();
            }
        }
        set(&mut self.run.mode, &o.mode);
        set(&mut self.run.reflector, &o.reflector);
        set(&mut self.run.r_freq, &o.r_freq);
        set(&mut self.run.s_freq, &o.s_freq);
        set(&mut self.run.turns_max, &o.max_turns);
        set(&mut self.run.reflexion_trials, &o.trials);
        set(&mut self.run.calibration_factor, &o.calibration_factor);
        set(&mut self.run.few_shot, &o.few_shot);
        set(&mut self.run.seed, &o.seed);
        if o.env.is_some() {
            self.env.kind = o.env;
        }
        set(&mut self.env.task_types, &o.task_types);
        set(&mut self.env.n, &o.n);
        if o.tasks_file.is_some() {
            self.env.tasks_file = o.tasks_file.clone();
        }
        set(&mut self.llm.endpoint, &o.llm_endpoint);
        set(&mut self.llm.model, &o.llm_model);
        set(&mut self.backend.kind, &o.backend);
        set(&mut self.backend.cache, &o.cache);
        if o.cache_file.is_some() {
            self.backend.cache_file = o.cache_file.clone();
        }
        set(&mut self.output.out_dir, &o.out_dir);
        if o.constitution.is_some() {
            self.output.constitution = o.constitution.clone();
        }
        if o.rulebook.is_some() {
            self.output.rulebook = o.rulebook.clone();
        }
        set(&mut self.output.seeds, &o.seeds);
        self.output.dump_state |= o.dump_state;
    }

    /// File (if any) plus overrides, validated.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, HarnessError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.run
            .validate()
            .map_err(|e| config_error(format!("run.{}", e.field), e.reason))?;
        self.llm.validate().map_err(|e| config_error("llm", e.to_string()))?;
        if self.output.seeds < 1 {
            return Err(config_error("output.seeds", "must be at least 1"));
        }
        if self.env.tasks_file.is_none() && self.env.n < 1 {
            return Err(config_error("env.n", "must be at least 1"));
        }
        if let Some(kind) = self.env.kind {
            for t in &self.env.task_types {
                if !kind.task_types().contains(&t.as_str()) {
                    return Err(config_error(
                        "env.task_types",
                        format!(
                            "`{t}` is not a {kind} task type (known: {})",
                            kind.task_types().join(", ")
                        ),
                    ));
                }
            }
        }
        if self.run.mode == Mode::Cooperative && self.output.constitution.is_none() {
            return Err(config_error(
                "output.constitution",
                "cooperative mode reads a calibrated constitution",
            ));
        }
        Ok(())
    }

    pub fn env_kind(&self) -> Result<EnvKind, HarnessError> {
        self.env
            .kind
            .ok_or_else(|| config_error("env.kind", "no environment given (use --env)"))
    }

    pub fn task_types(&self) -> Result<Vec<String>, HarnessError> {
        if !self.env.task_types.is_empty() {
            return Ok(self.env.task_types.clone());
        }
        Ok(self.env_kind()?.task_types().iter().map(|s| s.to_string()).collect())
    }

    pub fn cache_file(&self) -> PathBuf {
        self.backend
            .cache_file
            .clone()
            .unwrap_or_else(|| self.output.out_dir.join("cache.jsonl"))
    }
}
