use crate::constitution::{Category, CategoryCounts, Constitution, Origin, Source};
use crate::env::{make_env, EnvError, Environment, TaskSpec};
use crate::llm::{LlmClient, LlmError, Prompt, Role};
use crate::metrics::{RunMetrics, TaskRecord};
use crate::reflect::{
    neural_reflect, neuro_symbolic_reflect, symbolic_analyze, CategoryStatus, ExemplarSet, HarvestError,
    ReflectionBatch, ReflectionContext, RulebookError, SymbolicRulebook,
};
use crate::trajectory::Trajectory;

use super::config::{ConfigError, Mode, ReflectorKind, RunConfig, SymbolicTrigger};
use super::prompt::{assemble_action_prompt, extract_action, ActionPromptParts, FewShots};
use super::trace::{Trace, TraceEvent};

/// A reflector with whatever state it needs.
#[derive(Debug, Clone)]
pub enum Reflector {
    None,
    Neural,
    NeuroSymbolic(ExemplarSet),
    Symbolic(SymbolicRulebook),
}

impl Reflector {
    pub fn kind(&self) -> ReflectorKind {
        match self {
            Reflector::None => ReflectorKind::None,
            Reflector::Neural => ReflectorKind::Neural,
            Reflector::NeuroSymbolic(_) => ReflectorKind::NeuroSymbolic,
            Reflector::Symbolic(_) => ReflectorKind::Symbolic,
        }
    }

    pub fn source(&self) -> Source {
        match self {
            Reflector::Symbolic(_) => Source::Symbolic,
            Reflector::NeuroSymbolic(_) => Source::NeuroSymbolic,
            _ => Source::Neural,
        }
    }

    /// Static advice injected into action prompts. Only rulebooks carry any.
    pub fn guidance(&self, task_type: &str) -> &[String] {
        match self {
            Reflector::Symbolic(rb) => rb.guidance(task_type),
            _ => &[],
        }
    }
}

/// Everything shared by the tasks of one run.
#[derive(Clone, Copy)]
pub struct RunContext<'a> {
    pub config: &'a RunConfig,
    pub llm: &'a LlmClient,
    pub reflector: &'a Reflector,
    pub few_shots: &'a FewShots,
    pub trace: &'a Trace,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Rulebook(#[from] RulebookError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub reward: u8,
    /// Trajectory of the final trial.
    pub trajectory: Trajectory,
    pub trials: u32,
    pub parse_warnings: u64,
}

/// What the episode loop asks of the mode it runs under.
pub(crate) trait EpisodeHooks {
    fn constitution_block(&self) -> String;
    fn after_step(&mut self, idx: u32, traj: &Trajectory) -> Result<(), RunError>;
}

/// A constitution that never changes during the episode.
pub(crate) struct Frozen(pub String);

impl EpisodeHooks for Frozen {
    fn constitution_block(&self) -> String {
        self.0.clone()
    }

    fn after_step(&mut self, _: u32, _: &Trajectory) -> Result<(), RunError> {
        Ok(())
    }
}

struct SelfSustaining<'c, 'a> {
    ctx: RunContext<'a>,
    task: &'c TaskSpec,
    task_index: usize,
    constitution: &'c mut Constitution,
    prev_completed: usize,
    prev_errors: usize,
    parse_warnings: u64,
}

impl SelfSustaining<'_, '_> {
    fn reflect(
        &mut self,
        idx: u32,
        traj: &Trajectory,
    ) -> Result<Option<(ReflectionBatch, Vec<CategoryStatus>)>, RunError> {
        let cfg = self.ctx.config;
        let categories = cfg.enabled_categories();
        match self.ctx.reflector {
            Reflector::None => Ok(None),
            Reflector::Neural | Reflector::NeuroSymbolic(_) => {
                if !cfg.reflection_due(idx) {
                    return Ok(None);
                }
                let rendered = self.constitution.render(&categories);
                let traj_text = traj.render();
                let rctx = ReflectionContext {
                    system: self.task.env_kind.action_grammar(),
                    goal: &self.task.goal_text,
                    task_type: &self.task.task_type,
                    flavor: self.task.env_kind.into(),
                    constitution: &rendered,
                    trajectory: &traj_text,
                };
                let out = match self.ctx.reflector {
                    Reflector::NeuroSymbolic(ex) => neuro_symbolic_reflect(&rctx, &categories, self.ctx.llm, ex),
                    _ => neural_reflect(&rctx, &categories, self.ctx.llm),
                };
                self.ctx.trace.sync_calls(self.ctx.llm);
                let out = out?;
                self.parse_warnings += out.parse_warnings() as u64;
                Ok(Some((out.batch, out.status)))
            }
            Reflector::Symbolic(rb) => {
                let report = symbolic_analyze(self.task, traj, rb)?;
                let fire = match cfg.symbolic_trigger {
                    SymbolicTrigger::Conditional => {
                        report.completed > self.prev_completed || report.batch.errors.len() > self.prev_errors
                    }
                    SymbolicTrigger::Cadence => cfg.reflection_due(idx),
                };
                self.prev_completed = report.completed;
                self.prev_errors = report.batch.errors.len();
                Ok(fire.then_some((report.batch, Vec::new())))
            }
        }
    }
}

impl EpisodeHooks for SelfSustaining<'_, '_> {
    fn constitution_block(&self) -> String {
        self.constitution.render(&self.ctx.config.enabled_categories())
    }

    fn after_step(&mut self, idx: u32, traj: &Trajectory) -> Result<(), RunError> {
        let Some((mut batch, parse_status)) = self.reflect(idx, traj)? else {
            return Ok(());
        };
        let cfg = self.ctx.config;
        if !cfg.enabled(Category::Abstract) {
            batch.abstracts.clear();
        }
        if !cfg.enabled(Category::Error) {
            batch.errors.clear();
        }
        if !cfg.enabled(Category::Progress) {
            batch.progress.clear();
        }
        // Progress describes where the current attempt stands, so a fresh
        // report supersedes the previous one.
        if !batch.progress.is_empty() {
            self.constitution.clear_progress();
        }
        let source = self.ctx.reflector.source();
        let added = self
            .constitution
            .add_rules(&batch, Origin::new(self.task_index as u64, u64::from(idx)), source);
        self.ctx.trace.emit(&TraceEvent::Reflection {
            task: self.task_index,
            turn: idx,
            source,
            added,
            abstracts: batch.abstracts.len(),
            error: batch.errors.len(),
            progress: batch.progress.len(),
            parse_status,
        });
        Ok(())
    }
}

/// One attempt at a task: up to `turns_max` action calls, with the hooks
/// consulted after every step.
pub(crate) fn run_episode(
    ctx: RunContext<'_>,
    task_index: usize,
    trial: u32,
    task: &TaskSpec,
    env: &mut dyn Environment,
    memory: &[String],
    hooks: &mut dyn EpisodeHooks,
) -> Result<(u8, Trajectory), RunError> {
    let reset = env.reset(task)?;
    let mut traj = Trajectory::new(reset.observation);
    if reset.done {
        return Ok((reset.reward, traj));
    }
    let guidance = ctx.reflector.guidance(&task.task_type);
    let few_shots = ctx.few_shots.get(&task.task_type);
    for idx in 0..ctx.config.turns_max {
        ctx.trace.emit(&TraceEvent::TurnStart {
            task: task_index,
            trial,
            turn: idx,
        });
        let block = hooks.constitution_block();
        let prompt = assemble_action_prompt(&ActionPromptParts {
            grammar: &reset.action_grammar,
            guidance,
            constitution: &block,
            few_shots,
            memory,
            goal: &task.goal_text,
            trajectory: &traj,
        });
        let reply = ctx.llm.complete(&prompt, Role::Action);
        ctx.trace.sync_calls(ctx.llm);
        let action = extract_action(&reply?.text);
        let step = env.step(&action)?;
        ctx.trace.emit(&TraceEvent::EnvStep {
            task: task_index,
            trial,
            turn: idx,
            action: action.clone(),
            observation: step.observation.clone(),
            reward: step.reward,
            done: step.done,
        });
        traj.push(action, step.observation);
        hooks.after_step(idx, &traj)?;
        if step.done {
            return Ok((step.reward, traj));
        }
    }
    Ok((0, traj))
}

/// Solves one task while reflecting into `constitution`. Progress rules are
/// cleared on entry and exit, whatever the outcome.
pub fn run_task(
    ctx: RunContext<'_>,
    task_index: usize,
    task: &TaskSpec,
    constitution: &mut Constitution,
    env: &mut dyn Environment,
) -> Result<TaskOutcome, RunError> {
    constitution.clear_progress();
    let mut hooks = SelfSustaining {
        ctx,
        task,
        task_index,
        constitution: &mut *constitution,
        prev_completed: 0,
        prev_errors: 0,
        parse_warnings: 0,
    };
    let result = run_episode(ctx, task_index, 1, task, env, &[], &mut hooks);
    let parse_warnings = hooks.parse_warnings;
    constitution.clear_progress();
    let (reward, trajectory) = result?;
    Ok(TaskOutcome {
        reward,
        trajectory,
        trials: 1,
        parse_warnings,
    })
}

/// Per-task driver shared by every mode.
pub(crate) type TaskRunner<'r> =
    dyn FnMut(&mut Constitution, usize, &TaskSpec, &mut dyn Environment) -> Result<TaskOutcome, RunError> + 'r;

/// Runs `tasks` in order with a shared constitution. Transport failures are
/// recorded against the task that hit them; anything else aborts the run.
pub(crate) fn drive(
    ctx: RunContext<'_>,
    tasks: &[TaskSpec],
    constitution: &mut Constitution,
    summarize: bool,
    runner: &mut TaskRunner<'_>,
) -> Result<RunMetrics, RunError> {
    if tasks.is_empty() {
        return Err(RunError::Usage("no tasks to run".into()));
    }
    ctx.config.validate()?;
    ctx.trace.start_after(ctx.llm);
    let mut records = Vec::with_capacity(tasks.len());
    let mut sizes: Vec<CategoryCounts> = Vec::with_capacity(tasks.len());
    let mut parse_warnings = 0;
    let mut summarization_failures = 0;
    for (i, task) in tasks.iter().enumerate() {
        let before = ctx.llm.counts();
        let mut env = make_env(task.env_kind);
        let (reward, turns, trials, error) = match runner(constitution, i, task, env.as_mut()) {
            Ok(o) => {
                parse_warnings += o.parse_warnings;
                (o.reward, o.trajectory.turn() as u32, o.trials, None)
            }
            Err(RunError::Llm(e)) if !e.is_fatal() => {
                log::warn!("task {i} ({}) abandoned: {e}", task.id());
                constitution.clear_progress();
                (0, 0, 1, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        ctx.trace.emit(&TraceEvent::TaskEnd {
            task: i,
            task_id: task.id(),
            reward,
            turns,
            trials,
            error: error.clone(),
        });
        if summarize && ctx.config.summarization_due(i + 1) {
            summarization_failures += summarize_constitution(ctx, constitution, i)?;
        }
        records.push(TaskRecord {
            task_id: task.id(),
            task_type: task.task_type.clone(),
            reward,
            turns,
            trials,
            calls: ctx.llm.counts().since(&before),
            error,
        });
        sizes.push(constitution.counts());
    }
    ctx.trace.sync_calls(ctx.llm);
    let config = serde_json::json!({
        "run": ctx.config,
        "llm": ctx.llm.settings(),
        "message_layout": crate::llm::MESSAGE_LAYOUT,
    });
    let label = format!("{}/{}", ctx.config.mode, ctx.config.reflector);
    RunMetrics::from_tasks(label, records, config, parse_warnings, summarization_failures, sizes)
        .map_err(|e| RunError::Usage(e.to_string()))
}

/// Rewrites the enabled long-term categories. Returns the number of
/// categories whose rewrite was refused or could not be requested.
fn summarize_constitution(ctx: RunContext<'_>, c: &mut Constitution, task_index: usize) -> Result<u64, RunError> {
    let categories: Vec<Category> = Category::LONG_TERM
        .into_iter()
        .filter(|cat| ctx.config.enabled(*cat))
        .collect();
    if categories.is_empty() {
        return Ok(0);
    }
    let origin = Origin::new(task_index as u64, 0);
    let result = c.summarize(&categories, origin, |_, prompt| {
        let reply = ctx.llm.complete(&Prompt::new("", prompt), Role::Summarization);
        ctx.trace.sync_calls(ctx.llm);
        reply.map(|r| r.text)
    });
    match result {
        Ok(outcome) => {
            for (cat, diag) in &outcome.failures {
                log::warn!("summarization of {cat} after task {task_index} kept old rules: {diag:?}");
            }
            ctx.trace.emit(&TraceEvent::Summarization {
                tasks_done: task_index + 1,
                replaced: outcome.replaced.clone(),
                failures: outcome.failures.iter().map(|(cat, _)| *cat).collect(),
            });
            Ok(outcome.failures.len() as u64)
        }
        Err(e) if !e.is_fatal() => {
            log::warn!("summarization after task {task_index} failed: {e}");
            ctx.trace.emit(&TraceEvent::Summarization {
                tasks_done: task_index + 1,
                replaced: Vec::new(),
                failures: categories.clone(),
            });
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs `tasks` under the configured mode. Only the self-sustaining mode
/// writes to `constitution`; cooperative runs read its long-term rules.
pub fn run_dataset(
    ctx: RunContext<'_>,
    tasks: &[TaskSpec],
    constitution: &mut Constitution,
) -> Result<RunMetrics, RunError> {
    match ctx.config.mode {
        Mode::SelfSustaining => {
            if ctx.reflector.kind() != ctx.config.reflector {
                return Err(RunError::Usage(format!(
                    "config names the {} reflector but a {} reflector was supplied",
                    ctx.config.reflector,
                    ctx.reflector.kind()
                )));
            }
            drive(ctx, tasks, constitution, true, &mut |c, i, task, env| {
                run_task(ctx, i, task, c, env)
            })
        }
        Mode::Cooperative => super::baselines::run_cooperative(ctx, tasks, constitution),
        Mode::React => super::baselines::run_react(ctx, tasks),
        Mode::Reflexion => super::baselines::run_reflexion(ctx, tasks),
    }
}
