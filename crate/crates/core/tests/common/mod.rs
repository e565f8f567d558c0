//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use reflect_core::agent::{FewShots, Reflector, RunConfig, RunContext, Trace};
use reflect_core::constitution::Category;
use reflect_core::env::{generate_tasks, EnvKind, TaskParams, TaskSpec};
use reflect_core::llm::{CompletionRequest, LlmClient, Role, Scripted};

pub const ABSTRACT_MARK: &str = "Generate a constitution specific for solving a";
pub const ERROR_MARK: &str = "covering the potential mistakes";
pub const PROGRESS_MARK: &str = "Critically examine the trajectory";
pub const SUMMARY_MARK: &str = "Here is the current constitution: ";

/// Which category a reflection prompt asks for, read from its instructions.
pub fn category_of(user: &str) -> Option<Category> {
    if user.contains(ABSTRACT_MARK) {
        Some(Category::Abstract)
    } else if user.contains(ERROR_MARK) {
        Some(Category::Error)
    } else if user.contains(PROGRESS_MARK) {
        Some(Category::Progress)
    } else {
        None
    }
}

pub fn well_formed_reflection(user: &str) -> String {
    match category_of(user) {
        Some(Category::Abstract) => "['Balls stay where they are dropped.']".into(),
        Some(Category::Error) => "[{'mistake': 'Thinking without acting', 'solution': 'Move toward the goal'}]".into(),
        Some(Category::Progress) => "['No subgoal completed yet.']".into(),
        None => "[]".into(),
    }
}

pub fn echo_summary(user: &str) -> String {
    user.lines()
        .find_map(|l| l.strip_prefix(SUMMARY_MARK))
        .unwrap_or("[]")
        .to_string()
}

/// Never finishes a task: every action is a think, so each task runs to
/// `turns_max`. Reflections are well formed; summaries echo their input.
pub fn staller() -> Scripted {
    Scripted::from_fn(|req: &CompletionRequest<'_>| {
        Ok(match req.role {
            Role::Action => "think: I am still planning.".into(),
            Role::Reflection => well_formed_reflection(&req.prompt.user),
            Role::Summarization => echo_summary(&req.prompt.user),
            Role::Critique => "I spent the whole trial thinking instead of acting.".into(),
        })
    })
}

/// Records every request's role and user text.
#[derive(Clone, Default)]
pub struct PromptLog(pub Arc<Mutex<Vec<(Role, String)>>>);

impl PromptLog {
    pub fn push(&self, req: &CompletionRequest<'_>) {
        self.0.lock().unwrap().push((req.role, req.prompt.user.clone()));
    }

    pub fn entries(&self) -> Vec<(Role, String)> {
        self.0.lock().unwrap().clone()
    }

    pub fn count(&self, pred: impl Fn(Role, &str) -> bool) -> usize {
        self.entries().iter().filter(|(r, u)| pred(*r, u)).count()
    }
}

/// [`staller`] that also logs prompts.
pub fn logged_staller(log: PromptLog) -> Scripted {
    let inner = staller();
    let client = LlmClient::with_backend(inner);
    Scripted::from_fn(move |req: &CompletionRequest<'_>| {
        log.push(req);
        client.complete(req.prompt, req.role).map(|c| c.text)
    })
}

pub fn gripper_tasks(n: usize, seed: u64) -> Vec<TaskSpec> {
    generate_tasks(EnvKind::Gripper, "transport", n, seed, &TaskParams::default()).unwrap()
}

pub struct Fixture {
    pub config: RunConfig,
    pub llm: LlmClient,
    pub reflector: Reflector,
    pub shots: FewShots,
    pub trace: Trace,
}

impl Fixture {
    pub fn new(config: RunConfig, backend: Scripted, reflector: Reflector) -> Self {
        Self {
            config,
            llm: LlmClient::with_backend(backend),
            reflector,
            shots: FewShots::none(),
            trace: Trace::memory(),
        }
    }

    pub fn ctx(&self) -> RunContext<'_> {
        RunContext {
            config: &self.config,
            llm: &self.llm,
            reflector: &self.reflector,
            few_shots: &self.shots,
            trace: &self.trace,
        }
    }
}

/// Tasks of every type of `kind`, `per_type` each.
pub fn tasks_of(kind: EnvKind, per_type: usize, seed: u64) -> Vec<TaskSpec> {
    kind.task_types()
        .iter()
        .flat_map(|t| generate_tasks(kind, t, per_type, seed, &TaskParams::default()).unwrap())
        .collect()
}

/// Random walk mixing valid moves, inapplicable grammar-shaped actions and
/// garbage, until `invalid` rejected actions have been sent. Returns the
/// first rejected action that changed the state hash, if any.
pub fn fuzz_invalid_actions(kind: EnvKind, invalid: usize, seed: u64) -> Result<(), String> {
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use reflect_core::env::{make_env, NOTHING_HAPPENS};

    const GARBAGE: &[&str] = &[
        "",
        "   ",
        "fly to the moon",
        "pick",
        "pick up",
        "go to",
        "move backward",
        "stack b1",
        "unstack b9 from b1",
        "move ball1 from rooma",
        "drop ball99 rooma left",
        "go through the wall",
        "toggle toggle",
        "turn around",
        "pick up red key 99",
        "\u{1F600}",
        "put-down",
        "think",
    ];
    let tasks = tasks_of(kind, 3, seed);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut env = make_env(kind);
    let mut task_i = 0;
    env.reset(&tasks[0]).map_err(|e| e.to_string())?;
    let mut rejected = 0;
    while rejected < invalid {
        if env.is_done() {
            task_i = (task_i + 1) % tasks.len();
            env.reset(&tasks[task_i]).map_err(|e| e.to_string())?;
        }
        let candidates = env.candidate_actions();
        let action = if rng.random_bool(0.3) {
            let g = GARBAGE.choose(&mut rng).unwrap().to_string();
            if rng.random_bool(0.5) {
                g
            } else {
                // Random noise appended to a candidate keeps it grammar-adjacent.
                format!("{} {}", candidates.choose(&mut rng).unwrap(), rng.random::<u16>())
            }
        } else {
            candidates.choose(&mut rng).unwrap().clone()
        };
        let before = env.state_hash();
        let step = env.step(&action).map_err(|e| format!("{action:?}: {e}"))?;
        if step.observation == NOTHING_HAPPENS {
            rejected += 1;
            if env.state_hash() != before {
                return Err(format!("{kind}: rejected action {action:?} changed the state"));
            }
        }
    }
    Ok(())
}
