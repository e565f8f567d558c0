use std::collections::BTreeMap;

use crate::env::{make_env, oracle_plan, seed, EnvError, EnvKind, TaskParams, TaskSpec};
use crate::llm::Prompt;
use crate::trajectory::Trajectory;

/// Inputs to one action prompt. Empty parts leave no trace in the output.
#[derive(Debug, Clone, Copy)]
pub struct ActionPromptParts<'a> {
    pub grammar: &'a str,
    /// Static rulebook advice appended to the system block.
    pub guidance: &'a [String],
    /// Rendered constitution.
    pub constitution: &'a str,
    pub few_shots: &'a [String],
    /// Critiques from earlier trials of the same task.
    pub memory: &'a [String],
    pub goal: &'a str,
    pub trajectory: &'a Trajectory,
}

fn count_word(n: usize) -> String {
    match n {
        1 => "one".into(),
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        5 => "five".into(),
        n => n.to_string(),
    }
}

pub fn few_shot_header(n: usize) -> String {
    if n == 1 {
        "Here is one example. It is very relevant. Please use the actions in this example as your guidelines.".into()
    } else {
        format!(
            "Here are {} examples. They are very relevant. Please use the actions in these examples as your guidelines.",
            count_word(n)
        )
    }
}

/// System: action grammar, then guidance. User: constitution, few-shot
/// examples, trial memory, then the task with its trajectory and the
/// next-action cue.
pub fn assemble_action_prompt(parts: &ActionPromptParts<'_>) -> Prompt {
    let mut system = parts.grammar.to_string();
    if !parts.guidance.is_empty() {
        system.push_str("\n\nFollow these guidelines:");
        for g in parts.guidance {
            system.push_str("\n- ");
            system.push_str(g);
        }
    }
    let mut sections = Vec::new();
    if !parts.constitution.trim().is_empty() {
        sections.push(parts.constitution.to_string());
    }
    if !parts.few_shots.is_empty() {
        let mut block = few_shot_header(parts.few_shots.len());
        for (i, ex) in parts.few_shots.iter().enumerate() {
            block.push_str(&format!("\nExample {}:\n{}", i + 1, ex));
        }
        sections.push(block);
    }
    if !parts.memory.is_empty() {
        let mut block = String::from("Reflections from your previous attempts at this task:");
        for m in parts.memory {
            block.push_str("\n- ");
            block.push_str(m.trim());
        }
        sections.push(block);
    }
    sections.push(format!(
        "Task: {}\n{}\nAction {}:",
        parts.goal,
        parts.trajectory.render(),
        parts.trajectory.turn() + 1
    ));
    Prompt::new(system, sections.join("\n\n"))
}

/// First non-empty line of the reply, without an `Action k:` prefix.
/// Unrecognizable replies pass through trimmed so the environment rejects
/// them.
pub fn extract_action(reply: &str) -> String {
    let Some(line) = reply.lines().map(str::trim).find(|l| !l.is_empty()) else {
        return String::new();
    };
    let line = line.trim_start_matches('>').trim();
    let lower = line.to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("action") {
        let digits = rest.trim_start().bytes().take_while(u8::is_ascii_digit).count();
        let after = rest.trim_start()[digits..].trim_start();
        if let Some(tail) = after.strip_prefix(':') {
            let cut = line.len() - tail.len();
            return line[cut..].trim().to_string();
        }
    }
    line.to_string()
}

/// Worked examples per task type, generated from oracle plans on seeds
/// disjoint from evaluation tasks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FewShots {
    by_type: BTreeMap<String, Vec<String>>,
}

const FEW_SHOT_LABEL: u64 = 0xF3;

impl FewShots {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn generate(
        kind: EnvKind,
        task_types: &[String],
        per_type: usize,
        run_seed: u64,
        params: &TaskParams,
    ) -> Result<Self, EnvError> {
        let mut by_type = BTreeMap::new();
        if per_type == 0 {
            return Ok(Self { by_type });
        }
        for (i, t) in task_types.iter().enumerate() {
            let s = seed::derive(seed::derive(run_seed, FEW_SHOT_LABEL), i as u64);
            let tasks = crate::env::generate_tasks(kind, t, per_type, s, params)?;
            let examples = tasks.iter().map(render_example).collect::<Result<Vec<_>, _>>()?;
            by_type.insert(t.clone(), examples);
        }
        Ok(Self { by_type })
    }

    pub fn get(&self, task_type: &str) -> &[String] {
        self.by_type.get(task_type).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Oracle replay of one task in prompt form.
pub fn render_example(task: &TaskSpec) -> Result<String, EnvError> {
    let plan = oracle_plan(task)?;
    let mut env = make_env(task.env_kind);
    let reset = env.reset(task)?;
    let mut traj = Trajectory::new(reset.observation);
    for a in plan {
        let r = env.step(&a)?;
        traj.push(a, r.observation);
    }
    Ok(format!("Task: {}\n{}", task.goal_text, traj.render()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitution::{ABSTRACT_HEADER, ERROR_HEADER, PROGRESS_HEADER};

    fn traj() -> Trajectory {
        let mut t = Trajectory::new("Robby is at rooma.");
        t.push("think: pick first", "OK.");
        t
    }

    #[test]
    fn sections_in_order() {
        let t = traj();
        let constitution = format!("{ABSTRACT_HEADER}\n- a\n\n{ERROR_HEADER}\n- e\n\n{PROGRESS_HEADER}\n- p");
        let shots = vec!["ex1".to_string(), "ex2".to_string()];
        let p = assemble_action_prompt(&ActionPromptParts {
            grammar: "GRAMMAR",
            guidance: &[],
            constitution: &constitution,
            few_shots: &shots,
            memory: &[],
            goal: "goal",
            trajectory: &t,
        });
        assert_eq!(p.system, "GRAMMAR");
        let pos = |s: &str| p.user.find(s).unwrap();
        assert!(pos(ABSTRACT_HEADER) < pos(ERROR_HEADER));
        assert!(pos(ERROR_HEADER) < pos(PROGRESS_HEADER));
        assert!(pos(PROGRESS_HEADER) < pos("Here are two examples. They are very relevant."));
        assert!(pos("Example 2:\nex2") < pos("Task: goal"));
        assert!(p
            .user
            .ends_with("Action 1: think: pick first\nObservation 1: OK.\nAction 2:"));
    }

    #[test]
    fn empty_parts_leave_no_headers() {
        let t = Trajectory::new("start");
        let p = assemble_action_prompt(&ActionPromptParts {
            grammar: "G",
            guidance: &[],
            constitution: "",
            few_shots: &[],
            memory: &[],
            goal: "goal",
            trajectory: &t,
        });
        assert_eq!(p.user, "Task: goal\nInitial observation: start\nAction 1:");
    }

    #[test]
    fn extraction() {
        assert_eq!(
            extract_action("\n  Action 3: pick ball1 rooma left\nObservation"),
            "pick ball1 rooma left"
        );
        assert_eq!(extract_action("move rooma roomb"), "move rooma roomb");
        assert_eq!(extract_action("> go to red ball 1"), "go to red ball 1");
        assert_eq!(extract_action("actionable idea"), "actionable idea");
        assert_eq!(extract_action("   "), "");
    }

    #[test]
    fn few_shots_are_solved_examples() {
        let fs = FewShots::generate(EnvKind::Gripper, &["transport".into()], 2, 5, &TaskParams::default()).unwrap();
        let ex = fs.get("transport");
        assert_eq!(ex.len(), 2);
        assert!(ex[0].starts_with("Task: The goal is to satisfy"));
        assert!(ex[0].ends_with("The goal is satisfied."));
        assert!(fs.get("other").is_empty());
    }
}
