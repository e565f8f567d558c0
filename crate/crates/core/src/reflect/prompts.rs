//! Reflection prompt templates.
//!
//! The three category instructions share their wording across benchmarks
//! and differ only in the worked example line, selected by [`Flavor`].

use crate::constitution::Category;
use crate::env::EnvKind;
use crate::llm::Prompt;

use super::exemplars::Exemplar;

/// Which benchmark family's example lines the instructions carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Alfworld,
    Babyai,
    Pddl,
}

impl From<EnvKind> for Flavor {
    fn from(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Gridworld => Flavor::Babyai,
            EnvKind::Gripper | EnvKind::Blocksworld => Flavor::Pddl,
        }
    }
}

const ABSTRACT_COMMON: &str = "\
The constitution should be solely based on the observation in this environment, and should not contain general rules about regular world.
The rules in the constitution should be generalizable, abstract, correct, and profound.";

const ERROR_BODY: &str = "\
Generate a constitution specific for solving this task covering the potential mistakes performed so far and your suggestions on how to fix it.
The constitution should be solely based on the observation in this environment, and should not contain general rules about regular world.
The constitution should be in a python list of dictionaries format without any extra text in a single line.
You should thoroughly analyze the current trajectory and only provide feedback if a mistake happened so far. Sometimes mistakes can be indicated by the observation `Nothing happens`.
DO NOT predict future mistakes, or share advice about future steps.
If there are no mistakes so far, then return an empty list
If efficiency of the trajectory can be improved, you should add that as well.";

pub fn instructions(category: Category, flavor: Flavor, task_type: &str) -> String {
    match category {
        Category::Abstract => {
            let example = match flavor {
                Flavor::Alfworld => "Use microwave for heating or Tomatoes can be found in fridge, among others.",
                Flavor::Babyai => "If you are facing a wall, turn around and continue exploration.",
                Flavor::Pddl => "If you have only one arm, you cannot pick up two items",
            };
            format!(
                "Generate a constitution specific for solving a {task_type} task and about the environment.\n\
                 {ABSTRACT_COMMON}\n\
                 Some examples could include: {example}\n\
                 The constitution should be in a python list format (enclosed in [])"
            )
        }
        Category::Error => {
            let example = match flavor {
                Flavor::Alfworld => "[{'mistake': 'Cabinet was not opened', 'solution': 'Open the cabinet next time}, ...]",
                Flavor::Babyai => "[{'mistake': 'Going in circles', 'solution': 'Stop turning same way and going in circles...}, ...]",
                Flavor::Pddl => "[{'mistake': 'Attempted to pick up a block that is stacked', 'solution': 'Should use unstack...}, ...]",
            };
            format!("{ERROR_BODY}\nHere is an example: {example}")
        }
        Category::Progress => {
            let example = match flavor {
                Flavor::Alfworld => "Example: For a task of placing a heated apple in a garbage, one feedback example could be `You have heated the apple, now you should pick it up and go to garbagecan`",
                Flavor::Babyai => "Example: For a task of going through a green door, one feedback example could be `You have located a green key, now pick it up and locate a green door.`",
                Flavor::Pddl => "Example: An example could be: I have poured ingredient 1 into the shaker. I should then shake and serve in a clean shot class.",
            };
            format!(
                "Critically examine the trajectory so far to solve the task, and generate explicit feedback for solving leftover subtasks.\n\
                 {example}\n\
                 The constitution should be in a python list format (enclosed in []) without any extra text in a single line."
            )
        }
    }
}

/// Everything a reflection prompt is built from.
#[derive(Debug, Clone, Copy)]
pub struct ReflectionContext<'a> {
    /// Environment description and action grammar; the system message.
    pub system: &'a str,
    pub goal: &'a str,
    pub task_type: &'a str,
    pub flavor: Flavor,
    /// Rendered constitution; omitted from the prompt when empty.
    pub constitution: &'a str,
    pub trajectory: &'a str,
}

/// User message sections, in order: goal, constitution, instructions,
/// exemplars, trajectory. Empty sections are left out entirely.
pub fn reflection_prompt(ctx: &ReflectionContext<'_>, category: Category, exemplars: &[Exemplar]) -> Prompt {
    let mut sections = vec![format!("Task: {}", ctx.goal)];
    if !ctx.constitution.trim().is_empty() {
        sections.push(ctx.constitution.to_string());
    }
    sections.push(instructions(category, ctx.flavor, ctx.task_type));
    if !exemplars.is_empty() {
        let mut block = String::from("Here are some examples of trajectories and the expected output:");
        for (i, e) in exemplars.iter().enumerate() {
            block.push_str(&format!("\nExample {}:\n{}\nOutput: {}", i + 1, e.excerpt, e.output));
        }
        sections.push(block);
    }
    sections.push(format!("Here is the trajectory so far:\n{}", ctx.trajectory));
    Prompt::new(ctx.system, sections.join("\n\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx<'a>() -> ReflectionContext<'a> {
        ReflectionContext {
            system: "grammar",
            goal: "put a clean apple in fridge",
            task_type: "clean",
            flavor: Flavor::Alfworld,
            constitution: "",
            trajectory: "Initial observation: x",
        }
    }

    #[test]
    fn abstract_prompt_names_task_type() {
        let p = reflection_prompt(&ctx(), Category::Abstract, &[]);
        assert!(p.user.contains("solving a clean task"));
        assert!(p.user.contains("Use microwave for heating"));
        assert!(p.user.starts_with("Task: put a clean apple in fridge\n\nGenerate"));
        assert!(p
            .user
            .ends_with("Here is the trajectory so far:\nInitial observation: x"));
        assert_eq!(p.system, "grammar");
    }

    #[test]
    fn constitution_section_only_when_present() {
        let mut c = ctx();
        c.constitution = "Here are some aspects you have learnt so far.\n- a";
        let p = reflection_prompt(&c, Category::Error, &[]);
        assert!(p
            .user
            .contains("\n\nHere are some aspects you have learnt so far.\n- a\n\nGenerate"));
        assert!(p.user.contains("DO NOT predict future mistakes"));
    }

    #[test]
    fn flavors_pick_their_example_line() {
        let b = instructions(Category::Progress, Flavor::Babyai, "goto");
        assert!(b.contains("green key"));
        let p = instructions(Category::Error, Flavor::Pddl, "restack");
        assert!(p.contains("stacked"));
    }
}
