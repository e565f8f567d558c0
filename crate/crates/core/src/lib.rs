pub mod agent;
pub mod constitution;
pub mod env;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod reflect;
pub mod trajectory;
