//! Deterministic text worlds with binary terminal reward.
//!
//! Three kinds ship: a BabyAI-style [`gridworld`], and the PDDL-style
//! [`gripper`] and [`blocksworld`] domains. Each is a [`Domain`] (static
//! world plus a hashable state) wrapped by [`TextEnv`], which handles action
//! normalization, `think:` actions, the `Nothing happens.` contract and goal
//! checks. [`oracle_plan`] solves any task by breadth-first search.

pub mod blocksworld;
pub mod gridworld;
pub mod gripper;
mod search;
pub mod seed;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

pub use search::DEFAULT_STATE_LIMIT;

pub const NOTHING_HAPPENS: &str = "Nothing happens.";
pub const THINK_OK: &str = "OK.";
pub const GOAL_REACHED: &str = "The goal is satisfied.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Gridworld,
    Gripper,
    Blocksworld,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Gridworld, EnvKind::Gripper, EnvKind::Blocksworld];

    pub fn task_types(self) -> &'static [&'static str] {
        match self {
            EnvKind::Gridworld => gridworld::TASK_TYPES,
            EnvKind::Gripper => gripper::TASK_TYPES,
            EnvKind::Blocksworld => blocksworld::TASK_TYPES,
        }
    }

    pub fn action_grammar(self) -> &'static str {
        match self {
            EnvKind::Gridworld => gridworld::GRAMMAR,
            EnvKind::Gripper => gripper::GRAMMAR,
            EnvKind::Blocksworld => blocksworld::GRAMMAR,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Gridworld => "gridworld",
            EnvKind::Gripper => "gripper",
            EnvKind::Blocksworld => "blocksworld",
        })
    }
}

impl std::str::FromStr for EnvKind {
    type Err = EnvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gridworld" | "babyai" => Ok(EnvKind::Gridworld),
            "gripper" => Ok(EnvKind::Gripper),
            "blocksworld" | "blockworld" => Ok(EnvKind::Blocksworld),
            other => Err(EnvError::Config(format!("unknown env kind `{other}`"))),
        }
    }
}

/// Kind-specific sizing. Unset fields take the kind's default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskParams {
    /// Gridworld: interior side length of each room.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_size: Option<u32>,
    /// Gridworld rooms side by side, or gripper room count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rooms: Option<u32>,
    /// Gridworld distractor objects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<u32>,
    /// Gridworld: only report what lies in the 7x7 egocentric window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balls: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<u32>,
}

/// One task: the seed determines both the initial state and the goal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub env_kind: EnvKind,
    pub task_type: String,
    pub goal_text: String,
    pub seed: u64,
    #[serde(default)]
    pub params: TaskParams,
}

impl TaskSpec {
    /// Spec with the goal text filled in from the seeded instance.
    pub fn new(env_kind: EnvKind, task_type: &str, seed: u64, params: TaskParams) -> Result<Self, EnvError> {
        let mut spec = TaskSpec {
            env_kind,
            task_type: task_type.to_string(),
            goal_text: String::new(),
            seed,
            params,
        };
        let env = make_env(env_kind);
        spec.goal_text = env.goal_for(&spec)?;
        Ok(spec)
    }

    pub fn id(&self) -> String {
        format!("{}-{}-{:016x}", self.env_kind, self.task_type, self.seed)
    }
}

/// Reads a JSON array of task specs.
pub fn load_tasks(text: &str) -> Result<Vec<TaskSpec>, EnvError> {
    serde_json::from_str(text).map_err(|e| EnvError::Config(format!("task list: {e}")))
}

pub fn tasks_to_json(tasks: &[TaskSpec]) -> String {
    serde_json::to_string_pretty(tasks).expect("tasks serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: String,
    pub reward: u8,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetResult {
    pub observation: String,
    pub action_grammar: String,
    /// The goal already held in the initial state.
    pub done: bool,
    pub reward: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("environment configuration: {0}")]
    Config(String),
    #[error("task generation: {0}")]
    Generation(String),
    #[error("environment usage: {0}")]
    Usage(String),
    #[error("unsolvable task {task}: {reason}")]
    Unsolvable { task: String, reason: String },
}

/// Lower-cases and collapses whitespace.
pub fn normalize_action(action: &str) -> String {
    action.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn is_think(action: &str) -> bool {
    normalize_action(action).starts_with("think:")
}

/// A world with a hashable state. `apply` receives normalized action text
/// and returns the successor state plus an effect sentence, or `None` when
/// the action does not parse or its preconditions fail.
pub trait Domain: Sized + Send {
    type State: Clone + Eq + Hash + fmt::Debug + Send;

    const KIND: EnvKind;

    fn instance(spec: &TaskSpec) -> Result<(Self, Self::State), EnvError>;
    fn goal_text(&self) -> String;
    fn goal_holds(&self, state: &Self::State) -> bool;
    fn describe(&self, state: &Self::State) -> String;
    /// Every action worth trying from `state`; may include invalid ones.
    fn candidate_actions(&self, state: &Self::State) -> Vec<String>;
    fn apply(&self, state: &Self::State, action: &str) -> Option<(Self::State, String)>;
    /// Description shown once at reset, before the state.
    fn preamble(&self) -> String {
        String::new()
    }
}

/// Object-safe environment surface used by the agent loop.
pub trait Environment: Send {
    fn kind(&self) -> EnvKind;
    fn reset(&mut self, task: &TaskSpec) -> Result<ResetResult, EnvError>;
    fn step(&mut self, action: &str) -> Result<StepResult, EnvError>;
    fn is_done(&self) -> bool;
    fn state_hash(&self) -> u64;
    fn dump_state(&self) -> String;
    fn candidate_actions(&self) -> Vec<String>;
    /// Shortest plan from the current state.
    fn plan_from_current(&self, state_limit: usize) -> Result<Vec<String>, EnvError>;
    /// Goal text for a spec without resetting.
    fn goal_for(&self, task: &TaskSpec) -> Result<String, EnvError>;
}

struct Loaded<D: Domain> {
    domain: D,
    state: D::State,
    task_id: String,
}

pub struct TextEnv<D: Domain> {
    loaded: Option<Loaded<D>>,
    done: bool,
}

impl<D: Domain> Default for TextEnv<D> {
    fn default() -> Self {
        Self {
            loaded: None,
            done: false,
        }
    }
}

impl<D: Domain> TextEnv<D> {
    fn loaded(&self) -> Result<&Loaded<D>, EnvError> {
        self.loaded
            .as_ref()
            .ok_or_else(|| EnvError::Usage("step before reset".into()))
    }

    fn check_kind(task: &TaskSpec) -> Result<(), EnvError> {
        if task.env_kind != D::KIND {
            return Err(EnvError::Config(format!(
                "{} environment cannot run a {} task",
                D::KIND,
                task.env_kind
            )));
        }
        Ok(())
    }
}

impl<D: Domain> Environment for TextEnv<D> {
    fn kind(&self) -> EnvKind {
        D::KIND
    }

    fn reset(&mut self, task: &TaskSpec) -> Result<ResetResult, EnvError> {
        Self::check_kind(task)?;
        let (domain, state) = D::instance(task)?;
        let done = domain.goal_holds(&state);
        let mut observation = String::new();
        let preamble = domain.preamble();
        if !preamble.is_empty() {
            observation.push_str(&preamble);
            observation.push(' ');
        }
        observation.push_str(&domain.describe(&state));
        observation.push(' ');
        observation.push_str(&domain.goal_text());
        if done {
            observation.push(' ');
            observation.push_str(GOAL_REACHED);
        }
        self.loaded = Some(Loaded {
            domain,
            state,
            task_id: task.id(),
        });
        self.done = done;
        Ok(ResetResult {
            observation,
            action_grammar: D::KIND.action_grammar().to_string(),
            done,
            reward: u8::from(done),
        })
    }

    fn step(&mut self, action: &str) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::Usage("step after the episode finished".into()));
        }
        let loaded = self
            .loaded
            .as_mut()
            .ok_or_else(|| EnvError::Usage("step before reset".into()))?;
        let action = normalize_action(action);
        if action.starts_with("think:") {
            return Ok(StepResult {
                observation: THINK_OK.into(),
                reward: 0,
                done: false,
            });
        }
        let Some((next, effect)) = loaded.domain.apply(&loaded.state, &action) else {
            return Ok(StepResult {
                observation: NOTHING_HAPPENS.into(),
                reward: 0,
                done: false,
            });
        };
        loaded.state = next;
        let done = loaded.domain.goal_holds(&loaded.state);
        let mut observation = format!("{effect} {}", loaded.domain.describe(&loaded.state));
        if done {
            observation.push(' ');
            observation.push_str(GOAL_REACHED);
        }
        self.done = done;
        Ok(StepResult {
            observation,
            reward: u8::from(done),
            done,
        })
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        if let Some(l) = &self.loaded {
            l.state.hash(&mut h);
        }
        self.done.hash(&mut h);
        h.finish()
    }

    fn dump_state(&self) -> String {
        match &self.loaded {
            Some(l) => format!("task: {}\n{}\n{:?}", l.task_id, l.domain.describe(&l.state), l.state),
            None => "<not reset>".into(),
        }
    }

    fn candidate_actions(&self) -> Vec<String> {
        self.loaded
            .as_ref()
            .map(|l| l.domain.candidate_actions(&l.state))
            .unwrap_or_default()
    }

    fn plan_from_current(&self, state_limit: usize) -> Result<Vec<String>, EnvError> {
        let l = self.loaded()?;
        search::bfs(&l.domain, &l.state, state_limit).map_err(|reason| EnvError::Unsolvable {
            task: l.task_id.clone(),
            reason,
        })
    }

    fn goal_for(&self, task: &TaskSpec) -> Result<String, EnvError> {
        Self::check_kind(task)?;
        Ok(D::instance(task)?.0.goal_text())
    }
}

pub fn make_env(kind: EnvKind) -> Box<dyn Environment> {
    match kind {
        EnvKind::Gridworld => Box::new(TextEnv::<gridworld::Gridworld>::default()),
        EnvKind::Gripper => Box::new(TextEnv::<gripper::Gripper>::default()),
        EnvKind::Blocksworld => Box::new(TextEnv::<blocksworld::Blocksworld>::default()),
    }
}

/// Shortest action sequence that solves `task` from its initial state.
pub fn oracle_plan(task: &TaskSpec) -> Result<Vec<String>, EnvError> {
    let mut env = make_env(task.env_kind);
    env.reset(task)?;
    env.plan_from_current(DEFAULT_STATE_LIMIT)
}

/// `n` distinct, solvable, not-already-solved tasks, deterministic in `seed`.
pub fn generate_tasks(
    kind: EnvKind,
    task_type: &str,
    n: usize,
    seed: u64,
    params: &TaskParams,
) -> Result<Vec<TaskSpec>, EnvError> {
    if n == 0 {
        return Err(EnvError::Generation("n must be at least 1".into()));
    }
    if !kind.task_types().contains(&task_type) {
        return Err(EnvError::Config(format!(
            "{kind} has no task type `{task_type}` (known: {})",
            kind.task_types().join(", ")
        )));
    }
    let mut env = make_env(kind);
    let mut seeds = seed::SeedStream::new(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let max_attempts = n * 50 + 200;
    for _ in 0..max_attempts {
        if out.len() == n {
            break;
        }
        let task_seed = seeds.next_seed();
        let spec = TaskSpec::new(kind, task_type, task_seed, params.clone())?;
        let reset = env.reset(&spec)?;
        if reset.done || !seen.insert(reset.observation.clone()) {
            continue;
        }
        match env.plan_from_current(DEFAULT_STATE_LIMIT) {
            Ok(_) => out.push(spec),
            Err(EnvError::Unsolvable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if out.len() < n {
        return Err(EnvError::Generation(format!(
            "found only {} distinct solvable {kind}/{task_type} tasks in {max_attempts} attempts",
            out.len()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_collapses_case_and_space() {
        assert_eq!(normalize_action("  Pick   Ball1 ROOMA\tleft "), "pick ball1 rooma left");
    }

    #[test]
    fn step_before_reset_is_usage_error() {
        let mut env = make_env(EnvKind::Gripper);
        assert!(matches!(env.step("move rooma roomb"), Err(EnvError::Usage(_))));
    }

    #[test]
    fn wrong_kind_is_config_error() {
        let spec = TaskSpec::new(EnvKind::Gripper, "transport", 1, TaskParams::default()).unwrap();
        let mut env = make_env(EnvKind::Blocksworld);
        assert!(matches!(env.reset(&spec), Err(EnvError::Config(_))));
    }

    #[test]
    fn unknown_kind_string() {
        assert!("atari".parse::<EnvKind>().is_err());
        assert_eq!("blockworld".parse::<EnvKind>().unwrap(), EnvKind::Blocksworld);
    }

    #[test]
    fn task_list_round_trips_as_json() {
        let tasks = generate_tasks(EnvKind::Gripper, "transport", 3, 9, &TaskParams::default()).unwrap();
        assert_eq!(load_tasks(&tasks_to_json(&tasks)).unwrap(), tasks);
    }

    #[test]
    fn think_actions_answer_ok() {
        let spec = TaskSpec::new(EnvKind::Blocksworld, "restack", 4, TaskParams::default()).unwrap();
        let mut env = make_env(EnvKind::Blocksworld);
        env.reset(&spec).unwrap();
        let h = env.state_hash();
        let r = env.step("think: I should unstack first").unwrap();
        assert_eq!(r.observation, THINK_OK);
        assert_eq!(env.state_hash(), h);
    }

    #[test]
    fn step_after_done_is_usage_error() {
        let spec = generate_tasks(EnvKind::Gripper, "transport", 1, 2, &TaskParams::default())
            .unwrap()
            .remove(0);
        let plan = oracle_plan(&spec).unwrap();
        let mut env = make_env(EnvKind::Gripper);
        env.reset(&spec).unwrap();
        let mut last = None;
        for a in &plan {
            last = Some(env.step(a).unwrap());
        }
        assert!(last.unwrap().done);
        assert!(matches!(env.step(&plan[0]), Err(EnvError::Usage(_))));
    }
}
