use crate::constitution::{Category, Constitution};
use crate::env::TaskSpec;
use crate::llm::Role;
use crate::metrics::RunMetrics;
use crate::reflect::{reflection_prompt, ReflectionContext};
use crate::trajectory::Trajectory;

use super::run::{drive, run_episode, Frozen, RunContext, RunError, TaskOutcome};

fn empty_constitution(tasks: &[TaskSpec]) -> Constitution {
    Constitution::new(tasks.first().map(|t| t.env_kind.to_string()).unwrap_or_default())
}

/// Plain action loop: no constitution, no reflection.
pub fn run_react(ctx: RunContext<'_>, tasks: &[TaskSpec]) -> Result<RunMetrics, RunError> {
    let mut c = empty_constitution(tasks);
    drive(ctx, tasks, &mut c, false, &mut |_, i, task, env| {
        let (reward, trajectory) = run_episode(ctx, i, 1, task, env, &[], &mut Frozen(String::new()))?;
        Ok(TaskOutcome {
            reward,
            trajectory,
            trials: 1,
            parse_warnings: 0,
        })
    })
}

/// Action loop reading the long-term rules of a constitution built
/// elsewhere. The constitution is never modified.
pub fn run_cooperative(ctx: RunContext<'_>, tasks: &[TaskSpec], frozen: &Constitution) -> Result<RunMetrics, RunError> {
    let include: Vec<Category> = Category::LONG_TERM
        .into_iter()
        .filter(|c| ctx.config.enabled(*c))
        .collect();
    let block = frozen.render(&include);
    let mut scratch = frozen.clone();
    drive(ctx, tasks, &mut scratch, false, &mut |_, i, task, env| {
        let (reward, trajectory) = run_episode(ctx, i, 1, task, env, &[], &mut Frozen(block.clone()))?;
        Ok(TaskOutcome {
            reward,
            trajectory,
            trials: 1,
            parse_warnings: 0,
        })
    })
}

/// Retries each task up to `reflexion_trials` times. After a failed trial
/// the agent critiques it, and every later trial sees all critiques so far.
pub fn run_reflexion(ctx: RunContext<'_>, tasks: &[TaskSpec]) -> Result<RunMetrics, RunError> {
    let mut c = empty_constitution(tasks);
    let trials = ctx.config.reflexion_trials;
    drive(ctx, tasks, &mut c, false, &mut |_, i, task, env| {
        let mut memory = Vec::new();
        let mut trial = 1;
        loop {
            let (reward, trajectory) = run_episode(ctx, i, trial, task, env, &memory, &mut Frozen(String::new()))?;
            if reward == 1 || trial == trials {
                return Ok(TaskOutcome {
                    reward,
                    trajectory,
                    trials: trial,
                    parse_warnings: 0,
                });
            }
            memory.push(critique(ctx, task, &trajectory)?);
            trial += 1;
        }
    })
}

fn critique(ctx: RunContext<'_>, task: &TaskSpec, traj: &Trajectory) -> Result<String, RunError> {
    let text = traj.render();
    let rctx = ReflectionContext {
        system: task.env_kind.action_grammar(),
        goal: &task.goal_text,
        task_type: &task.task_type,
        flavor: task.env_kind.into(),
        constitution: "",
        trajectory: &text,
    };
    let reply = ctx
        .llm
        .complete(&reflection_prompt(&rctx, Category::Error, &[]), Role::Critique);
    ctx.trace.sync_calls(ctx.llm);
    Ok(reply?.text.trim().to_string())
}
