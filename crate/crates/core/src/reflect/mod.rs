//! Reflection strategies and their shared output type.

pub mod exemplars;
pub mod neural;
pub mod parse;
pub mod prompts;
pub mod symbolic;

pub use exemplars::{harvest_exemplars, Exemplar, ExemplarSet, HarvestError};
pub use neural::{neural_reflect, neuro_symbolic_reflect, CategoryStatus, ReflectOutcome};
pub use prompts::{reflection_prompt, Flavor, ReflectionContext};
pub use symbolic::{symbolic_analyze, symbolic_reflect, RulebookError, SymbolicReport, SymbolicRulebook};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub mistake: String,
    pub solution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
}

impl ErrorRecord {
    pub fn new(mistake: impl Into<String>, solution: impl Into<String>) -> Self {
        Self {
            mistake: mistake.into(),
            solution: solution.into(),
            priority: None,
        }
    }
}

/// Raw reflector output, one list per category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionBatch {
    #[serde(rename = "abstract")]
    pub abstracts: Vec<String>,
    #[serde(rename = "error")]
    pub errors: Vec<ErrorRecord>,
    pub progress: Vec<String>,
}

impl ReflectionBatch {
    pub fn is_empty(&self) -> bool {
        self.abstracts.is_empty() && self.errors.is_empty() && self.progress.is_empty()
    }
}
