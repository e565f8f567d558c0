use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constitution::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SelfSustaining,
    Cooperative,
    React,
    Reflexion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectorKind {
    Neural,
    Symbolic,
    NeuroSymbolic,
    None,
}

/// When the symbolic reflector runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolicTrigger {
    /// After any step that completes a subgoal or surfaces a new error.
    Conditional,
    /// On the same turn cadence as the neural reflectors.
    Cadence,
}

macro_rules! snake_enum {
    ($ty:ident { $($variant:ident = $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

snake_enum!(Mode {
    SelfSustaining = "self_sustaining",
    Cooperative = "cooperative",
    React = "react",
    Reflexion = "reflexion",
});
snake_enum!(ReflectorKind {
    Neural = "neural",
    Symbolic = "symbolic",
    NeuroSymbolic = "neuro_symbolic",
    None = "none",
});
snake_enum!(SymbolicTrigger {
    Conditional = "conditional",
    Cadence = "cadence",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub reflector: ReflectorKind,
    pub r_freq: u32,
    pub s_freq: u32,
    pub turns_max: u32,
    pub reflexion_trials: u32,
    pub calibration_factor: u32,
    pub reflect_at_turn_zero: bool,
    pub seed: u64,
    /// Categories that are reflected, rendered and summarized. Removing one
    /// knocks it out end to end.
    pub categories: Vec<Category>,
    /// Worked examples placed in every action prompt.
    pub few_shot: usize,
    /// Harvested exemplars per category for the neuro-symbolic reflector.
    pub exemplars_per_category: usize,
    pub symbolic_trigger: SymbolicTrigger,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::SelfSustaining,
            reflector: ReflectorKind::Neural,
            r_freq: 10,
            s_freq: 10,
            turns_max: 50,
            reflexion_trials: 15,
            calibration_factor: 1,
            reflect_at_turn_zero: false,
            seed: 0,
            categories: Category::ALL.to_vec(),
            few_shot: 2,
            exemplars_per_category: 2,
            symbolic_trigger: SymbolicTrigger::Conditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid run config `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, reason: &str| ConfigError {
            field: field.into(),
            reason: reason.into(),
        };
        for (field, v) in [
            ("r_freq", self.r_freq),
            ("s_freq", self.s_freq),
            ("turns_max", self.turns_max),
            ("reflexion_trials", self.reflexion_trials),
            ("calibration_factor", self.calibration_factor),
        ] {
            if v < 1 {
                return Err(err(field, "must be at least 1"));
            }
        }
        if matches!(self.mode, Mode::React | Mode::Cooperative) && self.reflector != ReflectorKind::None {
            return Err(err(
                "reflector",
                "react and cooperative modes take no reflector (use none)",
            ));
        }
        if self.mode == Mode::SelfSustaining && self.reflector == ReflectorKind::None {
            return Err(err("reflector", "self_sustaining mode needs a reflector"));
        }
        let mut seen = Vec::new();
        for c in &self.categories {
            if seen.contains(c) {
                return Err(err("categories", &format!("{c} listed twice")));
            }
            seen.push(*c);
        }
        Ok(())
    }

    /// Turn cadence for periodic reflection. `idx` is the 0-based index of
    /// the step just taken, so `r_freq = 10` fires after steps 11, 21, ...
    /// and, with `reflect_at_turn_zero`, also after the first step.
    pub fn reflection_due(&self, idx: u32) -> bool {
        idx.is_multiple_of(self.r_freq) && (idx > 0 || self.reflect_at_turn_zero)
    }

    /// Summarization after the `done`-th completed task (1-based).
    pub fn summarization_due(&self, done: usize) -> bool {
        done > 0 && done.is_multiple_of(self.s_freq as usize)
    }

    pub fn enabled(&self, c: Category) -> bool {
        self.categories.contains(&c)
    }

    /// Enabled categories in render order.
    pub fn enabled_categories(&self) -> Vec<Category> {
        Category::ALL.into_iter().filter(|c| self.enabled(*c)).collect()
    }
}
