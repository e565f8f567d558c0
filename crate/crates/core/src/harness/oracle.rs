//! Offline backend that plays each known task optimally. It reads the task
//! and the actions taken so far back out of the action prompt, replays them
//! and answers with the next step of a shortest plan. Useful for exercising
//! the full pipeline without a model.

use std::collections::HashMap;

use crate::env::{make_env, normalize_action, EnvError, TaskSpec, DEFAULT_STATE_LIMIT};
use crate::llm::{Backend, CompletionRequest, LlmError, Role};

const SUMMARY_MARKER: &str = "Here is the current constitution: ";
const UNKNOWN_TASK: &str = "think: I do not recognize this task.";

pub struct OracleBackend {
    /// Reset observation to the task and its shortest plan from the start.
    tasks: HashMap<String, (TaskSpec, Vec<String>)>,
}

impl OracleBackend {
    pub fn new(tasks: &[TaskSpec]) -> Result<Self, EnvError> {
        let mut map = HashMap::new();
        for t in tasks {
            let mut env = make_env(t.env_kind);
            let obs = env.reset(t)?.observation;
            let plan = env.plan_from_current(DEFAULT_STATE_LIMIT).unwrap_or_default();
            map.insert(obs, (t.clone(), plan));
        }
        Ok(Self { tasks: map })
    }

    fn next_action(&self, user: &str) -> String {
        let Some((initial, actions)) = parse_episode(user) else {
            return UNKNOWN_TASK.into();
        };
        let Some((task, plan)) = self.tasks.get(&initial) else {
            return UNKNOWN_TASK.into();
        };
        // On plan the answer is known; only a deviation needs a fresh search.
        let on_plan = actions.len() < plan.len() && actions.iter().zip(plan).all(|(a, p)| normalize_action(a) == *p);
        if on_plan {
            return plan[actions.len()].clone();
        }
        let mut env = make_env(task.env_kind);
        if env.reset(task).is_err() {
            return UNKNOWN_TASK.into();
        }
        for a in &actions {
            if env.step(a).is_err() {
                return UNKNOWN_TASK.into();
            }
        }
        match env.plan_from_current(DEFAULT_STATE_LIMIT) {
            Ok(plan) => plan.into_iter().next().unwrap_or_else(|| "think: done.".into()),
            Err(_) => UNKNOWN_TASK.into(),
        }
    }
}

/// Initial observation and actions of the trajectory in the last `Task:`
/// section of an action prompt.
pub(crate) fn parse_episode(user: &str) -> Option<(String, Vec<String>)> {
    let start = if user.starts_with("Task: ") {
        user.rfind("\nTask: ").map_or(0, |i| i + 1)
    } else {
        user.rfind("\nTask: ")? + 1
    };
    let mut lines = user[start..].lines().skip(1);
    let initial = lines.next()?.strip_prefix("Initial observation: ")?.to_string();
    let mut actions = Vec::new();
    for line in lines {
        let Some(rest) = line.strip_prefix("Action ") else {
            continue;
        };
        let Some((num, action)) = rest.split_once(':') else {
            continue;
        };
        let action = action.trim();
        if num.bytes().all(|b| b.is_ascii_digit()) && !action.is_empty() {
            actions.push(action.to_string());
        }
    }
    Some((initial, actions))
}

impl Backend for OracleBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let user = &request.prompt.user;
        Ok(match request.role {
            Role::Action => self.next_action(user),
            Role::Reflection => "[]".into(),
            Role::Critique => "No critique.".into(),
            // Echo the current list: the summary of a list is the list.
            Role::Summarization => user
                .lines()
                .find_map(|l| l.strip_prefix(SUMMARY_MARKER))
                .unwrap_or("[]")
                .to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_tasks, EnvKind, TaskParams};
    use crate::llm::{LlmClient, Prompt};

    #[test]
    fn parses_last_task_section() {
        let user = "Example 1:\nTask: a\nInitial observation: x\nAction 1: go\nObservation 1: y\n\nTask: b\nInitial observation: z\nAction 1: move rooma roomb\nObservation 1: ok\nAction 2:";
        let (init, acts) = parse_episode(user).unwrap();
        assert_eq!(init, "z");
        assert_eq!(acts, ["move rooma roomb"]);
        assert!(parse_episode("no task here").is_none());
    }

    #[test]
    fn echoes_summary_list() {
        let client = LlmClient::with_backend(OracleBackend::new(&[]).unwrap());
        let p = Prompt::new("", format!("Intro\n{SUMMARY_MARKER}[\"a\", \"b\"]\nFormat"));
        assert_eq!(client.complete(&p, Role::Summarization).unwrap().text, "[\"a\", \"b\"]");
    }

    #[test]
    fn unknown_task_gets_a_think() {
        let tasks = generate_tasks(EnvKind::Gripper, "transport", 1, 3, &TaskParams::default()).unwrap();
        let client = LlmClient::with_backend(OracleBackend::new(&tasks).unwrap());
        let p = Prompt::new("g", "Task: t\nInitial observation: elsewhere\nAction 1:");
        assert_eq!(client.complete(&p, Role::Action).unwrap().text, UNKNOWN_TASK);
    }
}
