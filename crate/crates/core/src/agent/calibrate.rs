use crate::constitution::{Category, Constitution, Origin};
use crate::env::{generate_tasks, make_env, seed, EnvKind, TaskParams, TaskSpec};
use crate::metrics::RunMetrics;
use crate::reflect::{neural_reflect, neuro_symbolic_reflect, ReflectionContext};

use super::config::{Mode, RunConfig};
use super::run::{run_dataset, Reflector, RunContext, RunError};
use super::trace::TraceEvent;

const CALIBRATION_LABEL: u64 = 0xCA;

/// Goal used for the free exploration pass.
pub const EXPLORATION_GOAL: &str =
    "Explore the environment and learn how it works. There is no specific task to solve.";

/// `factor` tasks per type, on seeds disjoint from evaluation and few-shot
/// seeds, interleaved by type.
pub fn calibration_tasks(
    kind: EnvKind,
    task_types: &[String],
    factor: u32,
    run_seed: u64,
    params: &TaskParams,
) -> Result<Vec<TaskSpec>, RunError> {
    let mut per_type = Vec::new();
    for (i, t) in task_types.iter().enumerate() {
        let s = seed::derive(seed::derive(run_seed, CALIBRATION_LABEL), i as u64);
        per_type.push(generate_tasks(kind, t, factor as usize, s, params)?);
    }
    let mut tasks = Vec::new();
    for j in 0..factor as usize {
        for list in &per_type {
            tasks.push(list[j].clone());
        }
    }
    Ok(tasks)
}

/// Builds a constitution for another agent to consume: an optional
/// exploration pass over the initial observations, then a self-sustaining
/// run over the calibration tasks. Returns the transfer copy, which holds
/// no Progress rules.
pub fn calibrate_meta_advisor(
    ctx: RunContext<'_>,
    kind: EnvKind,
    task_types: &[String],
    params: &TaskParams,
) -> Result<(Constitution, RunMetrics), RunError> {
    let cfg = RunConfig {
        mode: Mode::SelfSustaining,
        ..ctx.config.clone()
    };
    cfg.validate()?;
    let ctx = RunContext { config: &cfg, ..ctx };
    let tasks = calibration_tasks(kind, task_types, cfg.calibration_factor, cfg.seed, params)?;
    let mut constitution = Constitution::new(kind.to_string());

    // The symbolic reflector only reads trajectories, so exploration is a
    // neural concern.
    let explores = matches!(ctx.reflector, Reflector::Neural | Reflector::NeuroSymbolic(_));
    if explores && cfg.enabled(Category::Abstract) {
        let mut observations = Vec::new();
        for (i, task) in tasks.iter().enumerate() {
            let reset = make_env(kind).reset(task)?;
            observations.push(format!("Observation {}: {}", i + 1, reset.observation));
        }
        let text = observations.join("\n");
        let rctx = ReflectionContext {
            system: kind.action_grammar(),
            goal: EXPLORATION_GOAL,
            task_type: task_types.first().map(String::as_str).unwrap_or(""),
            flavor: kind.into(),
            constitution: "",
            trajectory: &text,
        };
        let only = [Category::Abstract];
        let out = match ctx.reflector {
            Reflector::NeuroSymbolic(ex) => neuro_symbolic_reflect(&rctx, &only, ctx.llm, ex),
            _ => neural_reflect(&rctx, &only, ctx.llm),
        };
        ctx.trace.sync_calls(ctx.llm);
        let out = out?;
        let source = ctx.reflector.source();
        let added = constitution.add_rules(&out.batch, Origin::new(0, 0), source);
        ctx.trace.emit(&TraceEvent::Reflection {
            task: 0,
            turn: 0,
            source,
            added,
            abstracts: out.batch.abstracts.len(),
            error: 0,
            progress: 0,
            parse_status: out.status,
        });
    }

    let mut metrics = run_dataset(ctx, &tasks, &mut constitution)?;
    metrics.label = format!("calibration/{}", cfg.reflector);
    Ok((constitution.for_transfer(), metrics))
}
