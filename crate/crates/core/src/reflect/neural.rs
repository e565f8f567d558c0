use serde::Serialize;

use crate::constitution::Category;
use crate::llm::{LlmClient, LlmError, Role};

use super::exemplars::ExemplarSet;
use super::parse::{parse_list_output, parse_record_output, ParseDiagnostic};
use super::prompts::{reflection_prompt, ReflectionContext};
use super::ReflectionBatch;

/// Per-category parse result of one reflection event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryStatus {
    pub category: Category,
    pub items: usize,
    pub diagnostic: Option<ParseDiagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectOutcome {
    pub batch: ReflectionBatch,
    pub status: Vec<CategoryStatus>,
}

impl ReflectOutcome {
    pub fn parse_warnings(&self) -> usize {
        self.status.iter().filter(|s| s.diagnostic.is_some()).count()
    }
}

/// One call per enabled category, in render order. Parse trouble leaves that
/// category empty and is reported in `status`; transport errors propagate.
pub fn neural_reflect(
    ctx: &ReflectionContext<'_>,
    categories: &[Category],
    llm: &LlmClient,
) -> Result<ReflectOutcome, LlmError> {
    reflect_with(ctx, categories, llm, None)
}

/// As [`neural_reflect`], with harvested exemplars placed between the
/// instructions and the trajectory. An empty set yields identical prompts.
pub fn neuro_symbolic_reflect(
    ctx: &ReflectionContext<'_>,
    categories: &[Category],
    llm: &LlmClient,
    exemplars: &ExemplarSet,
) -> Result<ReflectOutcome, LlmError> {
    reflect_with(ctx, categories, llm, Some(exemplars))
}

fn reflect_with(
    ctx: &ReflectionContext<'_>,
    categories: &[Category],
    llm: &LlmClient,
    exemplars: Option<&ExemplarSet>,
) -> Result<ReflectOutcome, LlmError> {
    let mut batch = ReflectionBatch::default();
    let mut status = Vec::new();
    for category in Category::ALL.into_iter().filter(|c| categories.contains(c)) {
        let shots = exemplars.map(|e| e.get(category)).unwrap_or(&[]);
        let prompt = reflection_prompt(ctx, category, shots);
        let text = llm.complete(&prompt, Role::Reflection)?.text;
        let (items, diagnostic) = match category {
            Category::Error => {
                let p = parse_record_output(&text);
                let n = p.items.len();
                batch.errors = p.items;
                (n, p.diagnostic)
            }
            Category::Abstract | Category::Progress => {
                let p = parse_list_output(&text);
                let n = p.items.len();
                if category == Category::Abstract {
                    batch.abstracts = p.items;
                } else {
                    batch.progress = p.items;
                }
                (n, p.diagnostic)
            }
        };
        if let Some(d) = &diagnostic {
            log::warn!("{category} reflection output did not parse cleanly: {d:?}");
        }
        status.push(CategoryStatus {
            category,
            items,
            diagnostic,
        });
    }
    Ok(ReflectOutcome { batch, status })
}
