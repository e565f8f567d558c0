use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub action: String,
    pub observation: String,
}

/// Append-only record of one attempt at a task. `turn()` is the number of
/// steps taken.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_observation: String,
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(initial_observation: impl Into<String>) -> Self {
        Self {
            initial_observation: initial_observation.into(),
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, action: impl Into<String>, observation: impl Into<String>) {
        self.steps.push(Step {
            action: action.into(),
            observation: observation.into(),
        });
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn turn(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Numbered action/observation lines starting at step `from` (0-based);
    /// the initial observation is included only when `from == 0`.
    pub fn render_from(&self, from: usize) -> String {
        let mut out = String::new();
        if from == 0 {
            out.push_str("Initial observation: ");
            out.push_str(&self.initial_observation);
        }
        for (i, s) in self.steps.iter().enumerate().skip(from) {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!(
                "Action {}: {}\nObservation {}: {}",
                i + 1,
                s.action,
                i + 1,
                s.observation
            ));
        }
        out
    }

    pub fn render(&self) -> String {
        self.render_from(0)
    }

    /// The last `n` steps, numbered as in the full trajectory.
    pub fn render_tail(&self, n: usize) -> String {
        self.render_from(self.steps.len().saturating_sub(n))
    }
}
