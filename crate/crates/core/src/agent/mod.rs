//! The agent loop, its baselines and the calibration driver.

pub mod baselines;
pub mod calibrate;
pub mod config;
pub mod prompt;
pub mod run;
pub mod trace;

pub use baselines::{run_cooperative, run_react, run_reflexion};
pub use calibrate::{calibrate_meta_advisor, calibration_tasks};
pub use config::{ConfigError, Mode, ReflectorKind, RunConfig, SymbolicTrigger};
pub use prompt::{assemble_action_prompt, extract_action, ActionPromptParts, FewShots};
pub use run::{run_dataset, run_task, Reflector, RunContext, RunError, TaskOutcome};
pub use trace::{Trace, TraceEvent};
