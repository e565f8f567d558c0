mod common;

use common::*;
use proptest::prelude::*;
use reflect_core::agent::{
    calibrate_meta_advisor, run_dataset, run_task, Mode, Reflector, ReflectorKind, RunConfig, Trace,
};
use reflect_core::constitution::{Category, Constitution, Origin, Source, PROGRESS_HEADER};
use reflect_core::env::{make_env, oracle_plan, EnvKind, TaskParams, NOTHING_HAPPENS};
use reflect_core::harness::OracleBackend;
use reflect_core::llm::{Backend, CompletionRequest, LlmClient, LlmError, Role, Scripted};
use reflect_core::reflect::{ReflectionBatch, SymbolicRulebook};
use serde_json::Value;

fn events(trace: &Trace, kind: &str) -> Vec<Value> {
    trace
        .lines()
        .iter()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["type"] == kind)
        .collect()
}

/// Oracle actions, empty reflections.
fn oracle_player(tasks: &[reflect_core::env::TaskSpec]) -> Scripted {
    let oracle = OracleBackend::new(tasks).unwrap();
    Scripted::from_fn(move |req: &CompletionRequest<'_>| match req.role {
        Role::Action => oracle.complete(req),
        Role::Summarization => Ok(echo_summary(&req.prompt.user)),
        _ => Ok("[]".into()),
    })
}

fn seeded_constitution() -> Constitution {
    let mut c = Constitution::new("gripper");
    let batch = ReflectionBatch {
        abstracts: vec!["Each gripper holds one ball.".into()],
        progress: vec!["Leftover note from elsewhere.".into()],
        ..ReflectionBatch::default()
    };
    c.add_rules(&batch, Origin::default(), Source::Neural);
    c
}

#[test]
fn oracle_replay_solves_task_and_only_clears_progress() {
    let tasks = gripper_tasks(1, 21);
    let plan = oracle_plan(&tasks[0]).unwrap();
    let f = Fixture::new(RunConfig::default(), oracle_player(&tasks), Reflector::Neural);
    let mut c = seeded_constitution();
    let mut expected = c.clone();
    expected.clear_progress();
    let mut env = make_env(EnvKind::Gripper);
    let out = run_task(f.ctx(), 0, &tasks[0], &mut c, env.as_mut()).unwrap();
    assert_eq!(out.reward, 1);
    assert_eq!(out.trajectory.turn(), plan.len());
    assert_eq!(c.rules(), expected.rules());
    assert_eq!(c.counts().progress, 0);
}

#[test]
fn invalid_actions_exhaust_turns() {
    let tasks = gripper_tasks(1, 4);
    let cfg = RunConfig {
        turns_max: 5,
        ..RunConfig::default()
    };
    let backend = Scripted::from_fn(|_: &CompletionRequest<'_>| Ok("juggle the balls".into()));
    let f = Fixture::new(cfg, backend, Reflector::Neural);
    let mut c = Constitution::new("gripper");
    let mut env = make_env(EnvKind::Gripper);
    let out = run_task(f.ctx(), 0, &tasks[0], &mut c, env.as_mut()).unwrap();
    assert_eq!(out.reward, 0);
    assert_eq!(out.trajectory.turn(), 5);
    assert!(out.trajectory.steps().iter().all(|s| s.observation == NOTHING_HAPPENS));
}

#[test]
fn fifty_turns_reflect_at_ten_twenty_thirty_forty() {
    let tasks = gripper_tasks(1, 8);
    let f = Fixture::new(RunConfig::default(), staller(), Reflector::Neural);
    let mut c = Constitution::new("gripper");
    run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    let turns: Vec<u64> = events(&f.trace, "reflection")
        .iter()
        .map(|e| e["turn"].as_u64().unwrap())
        .collect();
    assert_eq!(turns, [10, 20, 30, 40]);
    assert_eq!(f.llm.counts().reflection, 12);
}

#[test]
fn twenty_tasks_summarize_after_ten_and_twenty() {
    let tasks = gripper_tasks(20, 2);
    let cfg = RunConfig {
        turns_max: 2,
        ..RunConfig::default()
    };
    let f = Fixture::new(cfg, staller(), Reflector::Neural);
    let mut c = Constitution::new("gripper");
    let m = run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    let done: Vec<u64> = events(&f.trace, "summarization")
        .iter()
        .map(|e| e["tasks_done"].as_u64().unwrap())
        .collect();
    assert_eq!(done, [10, 20]);
    assert_eq!(m.llm_calls.summarization, 4);
    assert_eq!(c.summarization_count(), 2);
    // Summarization calls are charged to the task that triggered them.
    assert_eq!(m.tasks[9].calls.summarization, 2);
    assert_eq!(m.tasks[8].calls.summarization, 0);
}

#[test]
fn reflexion_feeds_critique_into_next_trial() {
    let tasks = gripper_tasks(1, 5);
    let cfg = RunConfig {
        mode: Mode::Reflexion,
        reflector: ReflectorKind::None,
        turns_max: 4,
        reflexion_trials: 3,
        ..RunConfig::default()
    };
    let log = PromptLog::default();
    let f = Fixture::new(cfg, logged_staller(log.clone()), Reflector::None);
    let mut c = Constitution::new("gripper");
    let m = run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    assert_eq!(m.llm_calls.action, 12);
    assert_eq!(m.llm_calls.critique, 2);
    assert_eq!(m.tasks[0].trials, 3);
    let critique = "I spent the whole trial thinking instead of acting.";
    let actions: Vec<String> = log
        .entries()
        .into_iter()
        .filter(|(r, _)| *r == Role::Action)
        .map(|(_, u)| u)
        .collect();
    assert!(!actions[3].contains(critique));
    assert!(actions[4].contains(critique));
    assert_eq!(actions[8].matches(critique).count(), 2);
    assert!(c.is_empty());
}

#[test]
fn knocked_out_category_is_never_prompted_or_rendered() {
    let tasks = gripper_tasks(2, 6);
    let cfg = RunConfig {
        turns_max: 12,
        categories: vec![Category::Error, Category::Progress],
        ..RunConfig::default()
    };
    let log = PromptLog::default();
    let f = Fixture::new(cfg, logged_staller(log.clone()), Reflector::Neural);
    let mut c = seeded_constitution();
    run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    assert_eq!(log.count(|r, u| r == Role::Reflection && u.contains(ABSTRACT_MARK)), 0);
    assert_eq!(log.count(|r, u| r == Role::Reflection && u.contains(ERROR_MARK)), 2);
    assert_eq!(log.count(|_, u| u.contains("Each gripper holds one ball.")), 0);
    assert_eq!(c.counts().abstracts, 1);
}

#[test]
fn cooperative_reads_but_never_writes() {
    let tasks = gripper_tasks(3, 9);
    let cfg = RunConfig {
        mode: Mode::Cooperative,
        reflector: ReflectorKind::None,
        turns_max: 12,
        ..RunConfig::default()
    };
    let log = PromptLog::default();
    let f = Fixture::new(cfg, logged_staller(log.clone()), Reflector::None);
    let mut c = seeded_constitution();
    let before = c.to_json();
    let m = run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    assert_eq!(c.to_json(), before);
    assert_eq!(m.llm_calls.reflection + m.llm_calls.summarization, 0);
    let actions = log.entries();
    assert!(actions.iter().all(|(_, u)| u.contains("Each gripper holds one ball.")));
    assert!(actions
        .iter()
        .all(|(_, u)| !u.contains("Leftover note") && !u.contains(PROGRESS_HEADER)));
}

struct FlakyFirstTask {
    inner: Scripted,
}

impl Backend for FlakyFirstTask {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, LlmError> {
        if req.role == Role::Action && req.prompt.user.contains("Action 2:") && self.inner.calls() < 2 {
            let _ = self.inner.complete(req);
            return Err(LlmError::Transport {
                role: req.role,
                status: Some(503),
                attempts: 3,
                message: "unavailable".into(),
            });
        }
        self.inner.complete(req)
    }
}

#[test]
fn transport_failure_is_recorded_against_its_task() {
    let tasks = gripper_tasks(2, 10);
    let cfg = RunConfig {
        turns_max: 3,
        ..RunConfig::default()
    };
    let f = Fixture {
        llm: LlmClient::new(
            Default::default(),
            std::sync::Arc::new(FlakyFirstTask { inner: staller() }),
        )
        .unwrap(),
        ..Fixture::new(cfg, staller(), Reflector::Neural)
    };
    let mut c = Constitution::new("gripper");
    let m = run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    assert!(m.tasks[0].error.as_deref().unwrap().contains("transport"));
    assert_eq!(m.tasks[0].reward, 0);
    assert!(m.tasks[1].error.is_none());
    assert_eq!(m.tasks[1].turns, 3);
}

#[test]
fn symbolic_reflector_makes_no_llm_reflection_calls() {
    let tasks = gripper_tasks(3, 12);
    let cfg = RunConfig {
        reflector: ReflectorKind::Symbolic,
        ..RunConfig::default()
    };
    let log = PromptLog::default();
    let oracle = oracle_player(&tasks);
    let l2 = log.clone();
    let backend = Scripted::from_fn(move |req: &CompletionRequest<'_>| {
        l2.push(req);
        oracle.complete(req)
    });
    let f = Fixture::new(
        cfg,
        backend,
        Reflector::Symbolic(SymbolicRulebook::builtin(EnvKind::Gripper)),
    );
    let mut c = Constitution::new("gripper");
    let m = run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    assert_eq!(m.sr, 100.0);
    assert_eq!(m.llm_calls.reflection, 0);
    assert!(!events(&f.trace, "reflection").is_empty());
    // Progress notes reach the action prompt mid-task.
    assert!(log.count(|r, u| r == Role::Action && u.contains(PROGRESS_HEADER)) > 0);
    assert_eq!(c.counts().progress, 0);
}

#[test]
fn calibration_hands_over_long_term_rules_only() {
    let cfg = RunConfig {
        turns_max: 11,
        calibration_factor: 2,
        ..RunConfig::default()
    };
    let log = PromptLog::default();
    let f = Fixture::new(cfg, logged_staller(log.clone()), Reflector::Neural);
    let (c, m) =
        calibrate_meta_advisor(f.ctx(), EnvKind::Gripper, &["transport".into()], &TaskParams::default()).unwrap();
    assert_eq!(m.tasks.len(), 2);
    assert_eq!(c.counts().progress, 0);
    assert!(c.counts().abstracts > 0 && c.counts().error > 0);
    assert!(c.rules().iter().all(|r| r.source == Source::MetaAdvisor));
    // One exploration call plus three per task (one event at step index 10).
    assert_eq!(m.llm_calls.reflection, 6);
    assert_eq!(f.llm.counts().reflection, 7);
    let first = &log.entries()[0];
    assert_eq!(first.0, Role::Reflection);
    assert!(first.1.contains("There is no specific task to solve."));
}

#[test]
fn trace_holds_every_call_and_step_once() {
    let tasks = gripper_tasks(12, 13);
    let cfg = RunConfig {
        turns_max: 11,
        ..RunConfig::default()
    };
    let f = Fixture::new(cfg, staller(), Reflector::Neural);
    let mut c = Constitution::new("gripper");
    let m = run_dataset(f.ctx(), &tasks, &mut c).unwrap();
    assert_eq!(events(&f.trace, "llm_call").len() as u64, f.llm.counts().total());
    assert_eq!(events(&f.trace, "env_step").len(), 12 * 11);
    assert_eq!(events(&f.trace, "task_end").len(), 12);
    let per_task: u64 = m.tasks.iter().map(|t| t.calls.total()).sum();
    assert_eq!(per_task, m.llm_calls.total());
}

/// Events the cadence rule should fire in one `turns`-step episode.
fn expected_events(turns: u32, r_freq: u32, at_zero: bool) -> u64 {
    let mut n = 0;
    for t in 0..turns {
        if t % r_freq == 0 && (t != 0 || at_zero) {
            n += 1;
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn call_law_and_progress_isolation(
        n in 1usize..5,
        turns in 1u32..9,
        r_freq in 1u32..5,
        s_freq in 1u32..4,
        at_zero in any::<bool>(),
    ) {
        let tasks = gripper_tasks(n, 77);
        let cfg = RunConfig {
            turns_max: turns,
            r_freq,
            s_freq,
            reflect_at_turn_zero: at_zero,
            ..RunConfig::default()
        };
        let log = PromptLog::default();
        let f = Fixture::new(cfg, logged_staller(log.clone()), Reflector::Neural);
        let mut c = Constitution::new("gripper");
        let m = run_dataset(f.ctx(), &tasks, &mut c).unwrap();
        let events = expected_events(turns, r_freq, at_zero);
        let summaries = (n as u64) / u64::from(s_freq);
        prop_assert_eq!(m.llm_calls.action, n as u64 * u64::from(turns));
        prop_assert_eq!(m.llm_calls.reflection, n as u64 * events * 3);
        prop_assert_eq!(m.llm_calls.summarization, summaries * 2);
        for (role, user) in log.entries() {
            if role == Role::Action && user.ends_with("\nAction 1:") {
                prop_assert!(!user.contains(PROGRESS_HEADER));
            }
        }
        prop_assert!(m.constitution_sizes.iter().all(|s| s.progress == 0));
    }
}
