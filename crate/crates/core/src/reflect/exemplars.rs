//! Few-shot exemplars for neuro-symbolic reflection, harvested by running
//! the symbolic reflector over oracle trajectories.

use serde::{Deserialize, Serialize};

use crate::constitution::Category;
use crate::env::{make_env, EnvError, TaskSpec, DEFAULT_STATE_LIMIT, NOTHING_HAPPENS};
use crate::trajectory::Trajectory;

use super::parse::{list_literal, record_literal};
use super::symbolic::{symbolic_analyze, RulebookError, SymbolicRulebook};

/// Steps of context kept in each exemplar excerpt.
pub const EXCERPT_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub excerpt: String,
    pub output: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSet {
    #[serde(rename = "abstract")]
    pub abstracts: Vec<Exemplar>,
    #[serde(rename = "error")]
    pub errors: Vec<Exemplar>,
    pub progress: Vec<Exemplar>,
}

impl ExemplarSet {
    pub fn get(&self, category: Category) -> &[Exemplar] {
        match category {
            Category::Abstract => &self.abstracts,
            Category::Error => &self.errors,
            Category::Progress => &self.progress,
        }
    }

    fn get_mut(&mut self, category: Category) -> &mut Vec<Exemplar> {
        match category {
            Category::Abstract => &mut self.abstracts,
            Category::Error => &mut self.errors,
            Category::Progress => &mut self.progress,
        }
    }

    pub fn len(&self) -> usize {
        self.abstracts.len() + self.errors.len() + self.progress.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarvestError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Rulebook(#[from] RulebookError),
}

/// Per-task candidates, per category, in trajectory order.
type Candidates = [Vec<Exemplar>; 3];

fn category_slot(c: Category) -> usize {
    Category::ALL.iter().position(|x| *x == c).expect("category")
}

/// Replays each task's oracle plan, plus a variant that first repeats an
/// invalid action `invalid_streak` times, and records the symbolic output
/// whenever a subgoal completes or a new error is detected. At most `k`
/// exemplars per category are kept, taken round-robin across tasks with
/// each task's latest distinct outputs first.
pub fn harvest_exemplars(
    tasks: &[TaskSpec],
    rulebook: &SymbolicRulebook,
    k: usize,
) -> Result<ExemplarSet, HarvestError> {
    let mut set = ExemplarSet::default();
    if k == 0 {
        return Ok(set);
    }
    let mut per_task: Vec<Candidates> = Vec::new();
    for task in tasks {
        let streak = rulebook.rules(&task.task_type)?.error_heuristics.invalid_streak;
        let mut cands: Candidates = Default::default();
        for perturb in [false, true] {
            let runs = replay(task, rulebook, if perturb { streak } else { 0 })?;
            for (i, mut list) in runs.into_iter().enumerate() {
                cands[i].append(&mut list);
            }
        }
        per_task.push(cands);
    }
    for category in Category::ALL {
        let slot = category_slot(category);
        let mut queues: Vec<Vec<Exemplar>> = per_task.iter().map(|c| c[slot].clone()).collect();
        let out = set.get_mut(category);
        while out.len() < k && queues.iter().any(|q| !q.is_empty()) {
            for q in queues.iter_mut() {
                if out.len() >= k {
                    break;
                }
                while let Some(e) = q.pop() {
                    if !out.iter().any(|o| o.output == e.output) {
                        out.push(e);
                        break;
                    }
                }
            }
        }
    }
    Ok(set)
}

fn first_invalid_action(task: &TaskSpec) -> Result<Option<String>, EnvError> {
    let mut env = make_env(task.env_kind);
    env.reset(task)?;
    for action in env.candidate_actions() {
        let mut probe = make_env(task.env_kind);
        probe.reset(task)?;
        if probe.step(&action)?.observation == NOTHING_HAPPENS {
            return Ok(Some(action));
        }
    }
    Ok(None)
}

fn replay(task: &TaskSpec, rulebook: &SymbolicRulebook, inject: usize) -> Result<Candidates, HarvestError> {
    let mut env = make_env(task.env_kind);
    let reset = env.reset(task)?;
    let plan = env.plan_from_current(DEFAULT_STATE_LIMIT)?;
    let mut actions = Vec::new();
    if inject > 0 {
        match first_invalid_action(task)? {
            Some(bad) => actions.extend(std::iter::repeat_n(bad, inject)),
            None => return Ok(Default::default()),
        }
    }
    actions.extend(plan);
    let mut traj = Trajectory::new(reset.observation);
    let mut out: Candidates = Default::default();
    let mut prev_completed = 0;
    let mut prev_errors = 0;
    for action in actions {
        let r = env.step(&action)?;
        traj.push(action, r.observation);
        let report = symbolic_analyze(task, &traj, rulebook)?;
        let excerpt = format!("Task: {}\n{}", task.goal_text, traj.render_tail(EXCERPT_STEPS));
        if report.completed > prev_completed && !report.batch.progress.is_empty() {
            out[category_slot(Category::Progress)].push(Exemplar {
                excerpt: excerpt.clone(),
                output: list_literal(&report.batch.progress),
            });
        }
        if report.batch.errors.len() > prev_errors {
            out[category_slot(Category::Error)].push(Exemplar {
                excerpt,
                output: record_literal(&report.batch.errors),
            });
        }
        prev_completed = report.completed;
        prev_errors = report.batch.errors.len();
        if r.done {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_tasks, EnvKind, TaskParams};
    use crate::reflect::parse::{parse_list_output, parse_record_output};

    fn gripper_task() -> Vec<TaskSpec> {
        generate_tasks(EnvKind::Gripper, "transport", 1, 11, &TaskParams::default()).unwrap()
    }

    #[test]
    fn progress_exemplar_mentions_drop() {
        let set = harvest_exemplars(&gripper_task(), &SymbolicRulebook::builtin(EnvKind::Gripper), 2).unwrap();
        assert!(!set.progress.is_empty());
        assert!(
            set.progress.iter().any(|e| e.output.contains("drop")),
            "{:?}",
            set.progress
        );
        assert!(set.progress.len() <= 2);
    }

    #[test]
    fn perturbed_run_yields_error_exemplar() {
        let set = harvest_exemplars(&gripper_task(), &SymbolicRulebook::builtin(EnvKind::Gripper), 2).unwrap();
        assert!(!set.errors.is_empty());
        for e in &set.errors {
            let p = parse_record_output(&e.output);
            assert!(p.diagnostic.is_none() && !p.items.is_empty());
        }
        for e in &set.progress {
            assert!(parse_list_output(&e.output).diagnostic.is_none());
        }
        assert!(set.abstracts.is_empty());
    }

    #[test]
    fn zero_cap_is_empty() {
        let set = harvest_exemplars(&gripper_task(), &SymbolicRulebook::builtin(EnvKind::Gripper), 0).unwrap();
        assert!(set.is_empty());
    }
}
