//! Rule-based reflection over a trajectory.
//!
//! A rulebook maps each task type to an ordered list of progress trackers
//! and a pair of error heuristics. Trackers are regular expressions matched
//! against step observations; templates use `{name}` placeholders filled from
//! the task's goal fields, the tracker's capture groups (`{1}`, `{name}`,
//! `{match}`) or heuristic details (`{action}`, `{count}`, `{cycle}`).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};

use crate::env::{normalize_action, EnvKind, TaskSpec, NOTHING_HAPPENS};
use crate::trajectory::Trajectory;

use super::{ErrorRecord, ReflectionBatch};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RulebookError {
    #[error("rulebook parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("rulebook entry `{task_type}` invalid at `{field}`: {reason}")]
    Invalid {
        task_type: String,
        field: String,
        reason: String,
    },
    #[error("rulebook has no entry for task type `{task_type}`")]
    MissingTaskType { task_type: String },
    #[error("goal `{goal}` does not match the `{task_type}` goal_pattern")]
    GoalMismatch { task_type: String, goal: String },
    #[error("rulebook io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tracker {
    pub pattern: String,
    pub on_match: String,
    pub next_hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Messages {
    pub invalid_mistake: String,
    pub invalid_solution: String,
    pub loop_mistake: String,
    pub loop_solution: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorHeuristics {
    /// Identical consecutive actions answered with `Nothing happens.`
    /// needed to report a mistake.
    pub invalid_streak: usize,
    /// Longest action cycle (in steps) checked for immediate repetition.
    pub loop_window: usize,
    pub messages: Messages,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRules {
    /// Named groups become fields usable in patterns and templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_pattern: Option<String>,
    /// Static advice injected into the action prompt in symbolic mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guidance: Vec<String>,
    pub trackers: Vec<Tracker>,
    pub error_heuristics: ErrorHeuristics,
}

#[derive(Debug, Clone)]
pub struct SymbolicRulebook {
    tasks: BTreeMap<String, TaskRules>,
    goal_patterns: HashMap<String, Regex>,
}

const BUILTIN_GRIPPER: &str = include_str!("../../rulebooks/gripper.json");
const BUILTIN_BLOCKSWORLD: &str = include_str!("../../rulebooks/blocksworld.json");
const BUILTIN_GRIDWORLD: &str = include_str!("../../rulebooks/gridworld.json");

/// `{ident}` and `{digits}` placeholders in order of appearance.
fn placeholders(template: &str) -> Vec<(usize, usize, &str)> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let end = template[i + 1..].find('}').map(|e| i + 1 + e);
            if let Some(end) = end {
                let name = &template[i + 1..end];
                let ident = !name.is_empty()
                    && (name.bytes().all(|b| b.is_ascii_digit())
                        || (name.as_bytes()[0].is_ascii_alphabetic() || name.as_bytes()[0] == b'_')
                            && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_'));
                if ident {
                    out.push((i, end + 1, name));
                    i = end + 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

fn fill(template: &str, lookup: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::new();
    let mut last = 0;
    for (start, end, name) in placeholders(template) {
        out.push_str(&template[last..start]);
        match lookup(name) {
            Some(v) => out.push_str(&v),
            None => out.push_str(&template[start..end]),
        }
        last = end;
    }
    out.push_str(&template[last..]);
    out
}

/// Pattern placeholders are identifiers only, so `\d{2}` stays a quantifier.
fn fill_pattern(pattern: &str, fields: &HashMap<String, String>) -> String {
    fill(pattern, |name| {
        if name.as_bytes()[0].is_ascii_digit() {
            return None;
        }
        fields.get(name).map(|v| fancy_regex::escape(v).into_owned())
    })
}

fn group_names(re: &Regex) -> Vec<String> {
    re.capture_names().flatten().map(str::to_string).collect()
}

impl SymbolicRulebook {
    pub fn from_json(text: &str) -> Result<Self, RulebookError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let tasks: BTreeMap<String, TaskRules> =
            serde_path_to_error::deserialize(de).map_err(|e| RulebookError::Parse {
                field: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Self::new(tasks)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RulebookError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RulebookError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn builtin(kind: EnvKind) -> Self {
        let text = match kind {
            EnvKind::Gripper => BUILTIN_GRIPPER,
            EnvKind::Blocksworld => BUILTIN_BLOCKSWORLD,
            EnvKind::Gridworld => BUILTIN_GRIDWORLD,
        };
        Self::from_json(text).expect("built-in rulebooks are valid")
    }

    pub fn new(tasks: BTreeMap<String, TaskRules>) -> Result<Self, RulebookError> {
        let mut goal_patterns = HashMap::new();
        for (task_type, rules) in &tasks {
            let invalid = |field: String, reason: String| RulebookError::Invalid {
                task_type: task_type.clone(),
                field,
                reason,
            };
            let mut goal_fields: HashSet<String> = ["goal", "task_type"].map(String::from).into();
            if let Some(p) = &rules.goal_pattern {
                let re = Regex::new(p).map_err(|e| invalid("goal_pattern".into(), e.to_string()))?;
                goal_fields.extend(group_names(&re));
                goal_patterns.insert(task_type.clone(), re);
            }
            let check = |field: String, template: &str, extra: &HashSet<String>| {
                for (_, _, name) in placeholders(template) {
                    if !goal_fields.contains(name) && !extra.contains(name) {
                        return Err(invalid(field, format!("unresolvable placeholder `{{{name}}}`")));
                    }
                }
                Ok(())
            };
            let none = HashSet::new();
            for (i, t) in rules.trackers.iter().enumerate() {
                for (_, _, name) in placeholders(&t.pattern) {
                    if name.as_bytes()[0].is_ascii_digit() {
                        continue;
                    }
                    if !goal_fields.contains(name) {
                        return Err(invalid(
                            format!("trackers[{i}].pattern"),
                            format!("unresolvable placeholder `{{{name}}}`"),
                        ));
                    }
                }
                let dummy: HashMap<String, String> = goal_fields.iter().map(|f| (f.clone(), "x".into())).collect();
                let re = Regex::new(&fill_pattern(&t.pattern, &dummy))
                    .map_err(|e| invalid(format!("trackers[{i}].pattern"), e.to_string()))?;
                let mut groups: HashSet<String> = group_names(&re).into_iter().collect();
                groups.insert("match".into());
                groups.extend((1..re.captures_len()).map(|g| g.to_string()));
                check(format!("trackers[{i}].on_match"), &t.on_match, &groups)?;
                check(format!("trackers[{i}].next_hint"), &t.next_hint, &none)?;
            }
            let h = &rules.error_heuristics;
            if h.invalid_streak < 1 {
                return Err(invalid(
                    "error_heuristics.invalid_streak".into(),
                    "must be at least 1".into(),
                ));
            }
            if h.loop_window < 2 {
                return Err(invalid(
                    "error_heuristics.loop_window".into(),
                    "must be at least 2".into(),
                ));
            }
            let inv: HashSet<String> = ["action", "count"].map(String::from).into();
            let lp: HashSet<String> = ["cycle", "count"].map(String::from).into();
            check(
                "error_heuristics.messages.invalid_mistake".into(),
                &h.messages.invalid_mistake,
                &inv,
            )?;
            check(
                "error_heuristics.messages.invalid_solution".into(),
                &h.messages.invalid_solution,
                &inv,
            )?;
            check(
                "error_heuristics.messages.loop_mistake".into(),
                &h.messages.loop_mistake,
                &lp,
            )?;
            check(
                "error_heuristics.messages.loop_solution".into(),
                &h.messages.loop_solution,
                &lp,
            )?;
        }
        Ok(Self { tasks, goal_patterns })
    }

    pub fn rules(&self, task_type: &str) -> Result<&TaskRules, RulebookError> {
        self.tasks.get(task_type).ok_or_else(|| RulebookError::MissingTaskType {
            task_type: task_type.to_string(),
        })
    }

    pub fn task_types(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub fn guidance(&self, task_type: &str) -> &[String] {
        self.tasks.get(task_type).map(|r| r.guidance.as_slice()).unwrap_or(&[])
    }

    fn goal_fields(&self, task: &TaskSpec) -> Result<HashMap<String, String>, RulebookError> {
        let mut fields = HashMap::from([
            ("goal".to_string(), task.goal_text.clone()),
            ("task_type".to_string(), task.task_type.clone()),
        ]);
        if let Some(re) = self.goal_patterns.get(&task.task_type) {
            let mismatch = || RulebookError::GoalMismatch {
                task_type: task.task_type.clone(),
                goal: task.goal_text.clone(),
            };
            let caps = re.captures(&task.goal_text).ok().flatten().ok_or_else(mismatch)?;
            for name in group_names(re) {
                if let Some(m) = caps.name(&name) {
                    fields.insert(name, m.as_str().to_string());
                }
            }
        }
        Ok(fields)
    }
}

/// Symbolic reflection plus the tracker state that drives conditional
/// triggering.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicReport {
    pub batch: ReflectionBatch,
    pub completed: usize,
    pub total: usize,
}

pub fn symbolic_reflect(
    task: &TaskSpec,
    trajectory: &Trajectory,
    rulebook: &SymbolicRulebook,
) -> Result<ReflectionBatch, RulebookError> {
    symbolic_analyze(task, trajectory, rulebook).map(|r| r.batch)
}

pub fn symbolic_analyze(
    task: &TaskSpec,
    trajectory: &Trajectory,
    rulebook: &SymbolicRulebook,
) -> Result<SymbolicReport, RulebookError> {
    let rules = rulebook.rules(&task.task_type)?;
    let fields = rulebook.goal_fields(task)?;
    let field = |name: &str| fields.get(name).cloned();

    // Greedy in-order matching: each tracker takes the earliest observation
    // after the one consumed by its predecessor.
    let observations: Vec<&str> = trajectory.steps().iter().map(|s| s.observation.as_str()).collect();
    let mut next_obs = 0;
    let mut completed = 0;
    let mut last_note = None;
    for (i, t) in rules.trackers.iter().enumerate() {
        let re = Regex::new(&fill_pattern(&t.pattern, &fields)).map_err(|e| RulebookError::Invalid {
            task_type: task.task_type.clone(),
            field: format!("trackers[{i}].pattern"),
            reason: e.to_string(),
        })?;
        let hit = observations[next_obs..]
            .iter()
            .enumerate()
            .find_map(|(j, obs)| re.captures(obs).ok().flatten().map(|c| (j, c)));
        let Some((j, caps)) = hit else { break };
        next_obs += j + 1;
        completed += 1;
        last_note = Some(fill(&t.on_match, |name| {
            if name == "match" {
                return caps.get(0).map(|m| m.as_str().to_string());
            }
            if let Ok(g) = name.parse::<usize>() {
                return caps.get(g).map(|m| m.as_str().to_string());
            }
            caps.name(name).map(|m| m.as_str().to_string()).or_else(|| field(name))
        }));
    }
    let mut progress: Vec<String> = last_note.into_iter().collect();
    if let Some(t) = rules.trackers.get(completed) {
        progress.push(fill(&t.next_hint, field));
    }

    let h = &rules.error_heuristics;
    let mut errors: Vec<ErrorRecord> = Vec::new();
    let mut push = |r: ErrorRecord| {
        if !errors.contains(&r) {
            errors.push(r);
        }
    };
    for (action, count) in invalid_streaks(trajectory, h.invalid_streak) {
        let lookup = |name: &str| match name {
            "action" => Some(action.clone()),
            "count" => Some(count.to_string()),
            _ => field(name),
        };
        push(ErrorRecord::new(
            fill(&h.messages.invalid_mistake, lookup),
            fill(&h.messages.invalid_solution, lookup),
        ));
    }
    for cycle in repeated_cycles(trajectory, h.loop_window) {
        let text = cycle.join(", ");
        let lookup = |name: &str| match name {
            "cycle" => Some(text.clone()),
            "count" => Some("2".to_string()),
            _ => field(name),
        };
        push(ErrorRecord::new(
            fill(&h.messages.loop_mistake, lookup),
            fill(&h.messages.loop_solution, lookup),
        ));
    }
    Ok(SymbolicReport {
        batch: ReflectionBatch {
            abstracts: Vec::new(),
            errors,
            progress,
        },
        completed,
        total: rules.trackers.len(),
    })
}

/// Maximal runs of one normalized action each answered `Nothing happens.`,
/// at least `min` long.
fn invalid_streaks(trajectory: &Trajectory, min: usize) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut run: Option<(String, usize)> = None;
    for s in trajectory.steps() {
        let invalid = s.observation == NOTHING_HAPPENS;
        let action = normalize_action(&s.action);
        run = match run.take() {
            Some((a, n)) if invalid && a == action => Some((a, n + 1)),
            Some((a, n)) => {
                if n >= min {
                    out.push((a, n));
                }
                invalid.then_some((action, 1))
            }
            None => invalid.then_some((action, 1)),
        };
    }
    if let Some((a, n)) = run {
        if n >= min {
            out.push((a, n));
        }
    }
    out
}

/// Action cycles of length 2..=window immediately repeated once, each
/// reported at its first occurrence. Cycles made of a single repeated action
/// are left to the invalid-streak heuristic.
fn repeated_cycles(trajectory: &Trajectory, window: usize) -> Vec<Vec<String>> {
    let actions: Vec<String> = trajectory.steps().iter().map(|s| normalize_action(&s.action)).collect();
    let mut seen: Vec<Vec<String>> = Vec::new();
    for end in 0..=actions.len() {
        for len in 2..=window {
            if end < 2 * len {
                continue;
            }
            let a = &actions[end - 2 * len..end - len];
            let b = &actions[end - len..end];
            if a != b || a.iter().all(|x| *x == a[0]) || a.iter().any(|x| x.starts_with("think:")) {
                continue;
            }
            // The same loop seen from a different starting step is one loop.
            let known = seen
                .iter()
                .any(|c| c.len() == len && (0..len).any(|r| rotate(c, r) == a));
            if !known {
                seen.push(a.to_vec());
            }
        }
    }
    seen
}

fn rotate(c: &[String], r: usize) -> Vec<String> {
    c[r..].iter().chain(&c[..r]).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::TaskParams;

    fn book() -> SymbolicRulebook {
        SymbolicRulebook::from_json(
            r#"{
              "pick_two": {
                "goal_pattern": "^take the (?P<item>\\w+)$",
                "trackers": [
                  {"pattern": "You pick up the {item} (\\d+)", "on_match": "You have picked up {item} {1}.", "next_hint": "Find the {item}."},
                  {"pattern": "You put (?P<what>\\w+) down", "on_match": "Placed {what}.", "next_hint": "Put it down."}
                ],
                "error_heuristics": {"invalid_streak": 3, "loop_window": 4, "messages": {
                  "invalid_mistake": "Repeated invalid action `{action}` {count} times",
                  "invalid_solution": "Consult the valid actions instead",
                  "loop_mistake": "Going in circles: {cycle}",
                  "loop_solution": "Stop repeating"}}
              }
            }"#,
        )
        .unwrap()
    }

    fn task() -> TaskSpec {
        TaskSpec {
            env_kind: EnvKind::Gridworld,
            task_type: "pick_two".into(),
            goal_text: "take the soapbar".into(),
            seed: 0,
            params: TaskParams::default(),
        }
    }

    #[test]
    fn empty_trajectory_gives_first_hint_only() {
        let b = symbolic_reflect(&task(), &Trajectory::new("start"), &book()).unwrap();
        assert_eq!(b.progress, ["Find the soapbar."]);
        assert!(b.errors.is_empty() && b.abstracts.is_empty());
    }

    #[test]
    fn match_completes_subgoal_and_hints_next() {
        let mut t = Trajectory::new("start");
        t.push("take soapbar 2", "You pick up the soapbar 2 from the sink.");
        let r = symbolic_analyze(&task(), &t, &book()).unwrap();
        assert_eq!(r.completed, 1);
        assert_eq!(r.batch.progress, ["You have picked up soapbar 2.", "Put it down."]);
    }

    #[test]
    fn one_observation_completes_one_tracker() {
        let mut t = Trajectory::new("start");
        t.push("x", "You put soapbar down. You pick up the soapbar 1");
        let r = symbolic_analyze(&task(), &t, &book()).unwrap();
        assert_eq!(r.completed, 1);
        t.push("y", "You put it down");
        assert_eq!(symbolic_analyze(&task(), &t, &book()).unwrap().completed, 2);
    }

    #[test]
    fn streak_of_three_invalid_actions() {
        let mut t = Trajectory::new("start");
        for _ in 0..3 {
            t.push("Pick up sponge", NOTHING_HAPPENS);
        }
        let b = symbolic_reflect(&task(), &t, &book()).unwrap();
        assert_eq!(
            b.errors,
            [ErrorRecord::new(
                "Repeated invalid action `pick up sponge` 3 times",
                "Consult the valid actions instead"
            )]
        );
        let mut short = Trajectory::new("start");
        short.push("a", NOTHING_HAPPENS);
        short.push("a", NOTHING_HAPPENS);
        short.push("b", NOTHING_HAPPENS);
        assert!(symbolic_reflect(&task(), &short, &book()).unwrap().errors.is_empty());
    }

    #[test]
    fn loop_detected_once_across_rotations() {
        let mut t = Trajectory::new("start");
        for a in ["turn left", "move forward", "turn left", "move forward", "turn left"] {
            t.push(a, "ok");
        }
        let b = symbolic_reflect(&task(), &t, &book()).unwrap();
        assert_eq!(b.errors.len(), 1);
        assert_eq!(b.errors[0].mistake, "Going in circles: turn left, move forward");
    }

    #[test]
    fn missing_task_type() {
        let mut t = task();
        t.task_type = "heat".into();
        assert!(matches!(
            symbolic_reflect(&t, &Trajectory::new(""), &book()),
            Err(RulebookError::MissingTaskType { .. })
        ));
    }

    #[test]
    fn unresolvable_placeholder_rejected() {
        let bad = r#"{"t": {"trackers": [{"pattern": "a", "on_match": "{nope}", "next_hint": "h"}],
            "error_heuristics": {"invalid_streak": 3, "loop_window": 4, "messages": {
              "invalid_mistake": "m", "invalid_solution": "s", "loop_mistake": "m", "loop_solution": "s"}}}}"#;
        match SymbolicRulebook::from_json(bad) {
            Err(RulebookError::Invalid { field, .. }) => assert_eq!(field, "trackers[0].on_match"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_re = bad.replace("\"a\"", "\"(\"").replace("{nope}", "x");
        assert!(matches!(
            SymbolicRulebook::from_json(&bad_re),
            Err(RulebookError::Invalid { .. })
        ));
    }

    #[test]
    fn quantifier_braces_are_not_placeholders() {
        let mut fields = HashMap::new();
        fields.insert("item".to_string(), "a.b".to_string());
        assert_eq!(fill_pattern("\\d{2} {item}", &fields), "\\d{2} a\\.b");
    }

    #[test]
    fn builtin_rulebooks_cover_all_task_types() {
        for kind in EnvKind::ALL {
            let book = SymbolicRulebook::builtin(kind);
            for t in kind.task_types() {
                assert!(book.rules(t).is_ok(), "{kind}/{t}");
            }
        }
    }
}
