//! The evolving rule store consulted by every action prompt.
//!
//! Rules come in three categories. Abstract and Error rules describe the
//! environment and persist across tasks; Progress rules track the current
//! task and are dropped when it ends. Mutations bump [`Constitution::version`]
//! only when they change something.

mod store;
mod summarize;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::reflect::ReflectionBatch;

pub use store::{ConstitutionError, SCHEMA_VERSION};
pub use summarize::{summarization_prompt, SummaryOutcome};

pub const ABSTRACT_HEADER: &str = "Here are some aspects you have learnt so far.";
pub const ERROR_HEADER: &str =
    "Here are some mistakes you have done so far, and potential solutions that can be used in next turns.";
pub const PROGRESS_HEADER: &str = "Here are some feedback about your progress so far and guidelines for next steps.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Abstract,
    Error,
    Progress,
}

impl Category {
    /// Render order.
    pub const ALL: [Category; 3] = [Category::Abstract, Category::Error, Category::Progress];
    /// Categories that outlive a task and get summarized.
    pub const LONG_TERM: [Category; 2] = [Category::Abstract, Category::Error];

    pub fn header(self) -> &'static str {
        match self {
            Category::Abstract => ABSTRACT_HEADER,
            Category::Error => ERROR_HEADER,
            Category::Progress => PROGRESS_HEADER,
        }
    }

    pub fn scope(self) -> Scope {
        match self {
            Category::Progress => Scope::Task,
            Category::Abstract | Category::Error => Scope::Environment,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Abstract => "abstract",
            Category::Error => "error",
            Category::Progress => "progress",
        })
    }
}

impl std::str::FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abstract" => Ok(Category::Abstract),
            "error" => Ok(Category::Error),
            "progress" => Ok(Category::Progress),
            other => Err(format!("unknown reflection category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Environment,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Neural,
    Symbolic,
    NeuroSymbolic,
    MetaAdvisor,
}

/// Where a rule was produced: 0-based task index and turn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub task_index: u64,
    pub turn: u64,
}

impl Origin {
    pub fn new(task_index: u64, turn: u64) -> Self {
        Self { task_index, turn }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: u64,
    pub category: Category,
    pub scope: Scope,
    pub source: Source,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mistake: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
    pub origin: Origin,
}

/// Flat prompt form of an Error rule.
pub fn error_text(mistake: &str, solution: &str) -> String {
    format!("mistake: {}; solution: {}", mistake.trim(), solution.trim())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    #[serde(rename = "abstract")]
    pub abstracts: usize,
    pub error: usize,
    pub progress: usize,
}

impl CategoryCounts {
    pub fn get(&self, category: Category) -> usize {
        match category {
            Category::Abstract => self.abstracts,
            Category::Error => self.error,
            Category::Progress => self.progress,
        }
    }

    pub fn total(&self) -> usize {
        self.abstracts + self.error + self.progress
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constitution {
    environment_id: String,
    version: u64,
    summarization_count: u64,
    rules: Vec<Rule>,
}

impl Constitution {
    pub fn new(environment_id: impl Into<String>) -> Self {
        Self {
            environment_id: environment_id.into(),
            version: 0,
            summarization_count: 0,
            rules: Vec::new(),
        }
    }

    pub fn environment_id(&self) -> &str {
        &self.environment_id
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn summarization_count(&self) -> u64 {
        self.summarization_count
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_in(&self, category: Category) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(move |r| r.category == category)
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn counts(&self) -> CategoryCounts {
        let mut c = CategoryCounts::default();
        for r in &self.rules {
            match r.category {
                Category::Abstract => c.abstracts += 1,
                Category::Error => c.error += 1,
                Category::Progress => c.progress += 1,
            }
        }
        c
    }

    fn next_id(&self) -> u64 {
        self.rules.iter().map(|r| r.id + 1).max().unwrap_or(1)
    }

    fn contains(&self, category: Category, text: &str) -> bool {
        self.rules_in(category).any(|r| r.text == text)
    }

    /// Appends every batch entry whose trimmed text is new for its category.
    /// Returns the number of rules added.
    pub fn add_rules(&mut self, batch: &ReflectionBatch, origin: Origin, source: Source) -> usize {
        let mut added = 0;
        let mut push = |c: &mut Constitution, rule: Rule| {
            if rule.text.is_empty() || c.contains(rule.category, &rule.text) {
                return;
            }
            c.rules.push(rule);
            added += 1;
        };
        for text in &batch.abstracts {
            let rule = self.make_rule(Category::Abstract, text.trim().to_string(), source, origin);
            push(self, rule);
        }
        for rec in &batch.errors {
            if rec.mistake.trim().is_empty() || rec.solution.trim().is_empty() {
                continue;
            }
            let mut rule = self.make_rule(Category::Error, error_text(&rec.mistake, &rec.solution), source, origin);
            rule.mistake = Some(rec.mistake.trim().to_string());
            rule.solution = Some(rec.solution.trim().to_string());
            rule.priority = rec.priority;
            push(self, rule);
        }
        for text in &batch.progress {
            let rule = self.make_rule(Category::Progress, text.trim().to_string(), source, origin);
            push(self, rule);
        }
        if added > 0 {
            self.version += 1;
        }
        added
    }

    fn make_rule(&self, category: Category, text: String, source: Source, origin: Origin) -> Rule {
        Rule {
            id: self.next_id(),
            category,
            scope: category.scope(),
            source,
            text,
            mistake: None,
            solution: None,
            priority: None,
            origin,
        }
    }

    /// Drops every Progress rule. Returns how many were removed.
    pub fn clear_progress(&mut self) -> usize {
        let before = self.rules.len();
        self.rules.retain(|r| r.category != Category::Progress);
        let removed = before - self.rules.len();
        if removed > 0 {
            self.version += 1;
        }
        removed
    }

    /// Copy holding only Abstract and Error rules, re-tagged as produced by a
    /// meta-advisor. Used to hand a calibrated constitution to another agent.
    pub fn for_transfer(&self) -> Constitution {
        let rules = self
            .rules
            .iter()
            .filter(|r| r.category != Category::Progress)
            .map(|r| Rule {
                source: Source::MetaAdvisor,
                ..r.clone()
            })
            .collect::<Vec<_>>();
        let changed = rules != self.rules;
        Constitution {
            environment_id: self.environment_id.clone(),
            version: self.version + u64::from(changed),
            summarization_count: self.summarization_count,
            rules,
        }
    }

    /// Prompt block for the selected categories, in fixed
    /// Abstract, Error, Progress order. Empty categories are left out
    /// entirely, so an empty constitution renders as "".
    pub fn render(&self, include: &[Category]) -> String {
        let mut sections = Vec::new();
        for category in Category::ALL {
            if !include.contains(&category) {
                continue;
            }
            let lines: Vec<String> = self.rules_in(category).map(|r| format!("- {}", r.text)).collect();
            if lines.is_empty() {
                continue;
            }
            sections.push(format!("{}\n{}", category.header(), lines.join("\n")));
        }
        sections.join("\n\n")
    }
}
