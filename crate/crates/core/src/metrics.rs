use serde::{Deserialize, Serialize};

use crate::constitution::CategoryCounts;
use crate::llm::RoleCounts;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub task_type: String,
    pub reward: u8,
    /// Turns of the final trial.
    pub turns: u32,
    pub trials: u32,
    /// Calls attributed to this task, including any summarization it
    /// triggered.
    pub calls: RoleCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub schema_version: u32,
    pub label: String,
    pub sr: f64,
    pub avg_turns: f64,
    pub llm_calls: RoleCounts,
    pub parse_warning_count: u64,
    pub summarization_failures: u64,
    pub tasks: Vec<TaskRecord>,
    /// Resolved configuration the run used.
    pub config: serde_json::Value,
    /// Rule counts per category after each task.
    pub constitution_sizes: Vec<CategoryCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("success rate of an empty reward list")]
pub struct EmptyRewards;

/// Mean reward as a percentage, rounded to one decimal.
pub fn success_rate(rewards: &[u8]) -> Result<f64, EmptyRewards> {
    if rewards.is_empty() {
        return Err(EmptyRewards);
    }
    let wins: u64 = rewards.iter().map(|r| u64::from(*r)).sum();
    Ok((wins as f64 * 1000.0 / rewards.len() as f64).round() / 10.0)
}

impl RunMetrics {
    pub fn from_tasks(
        label: impl Into<String>,
        tasks: Vec<TaskRecord>,
        config: serde_json::Value,
        parse_warning_count: u64,
        summarization_failures: u64,
        constitution_sizes: Vec<CategoryCounts>,
    ) -> Result<Self, EmptyRewards> {
        let rewards: Vec<u8> = tasks.iter().map(|t| t.reward).collect();
        let sr = success_rate(&rewards)?;
        let avg_turns = tasks.iter().map(|t| f64::from(t.turns)).sum::<f64>() / tasks.len() as f64;
        let mut llm_calls = RoleCounts::default();
        for t in &tasks {
            llm_calls.add(&t.calls);
        }
        Ok(Self {
            schema_version: METRICS_SCHEMA_VERSION,
            label: label.into(),
            sr,
            avg_turns,
            llm_calls,
            parse_warning_count,
            summarization_failures,
            tasks,
            config,
            constitution_sizes,
        })
    }

    pub fn rewards(&self) -> Vec<u8> {
        self.tasks.iter().map(|t| t.reward).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn success_rate_examples() {
        assert_eq!(success_rate(&[1, 0, 1, 1]), Ok(75.0));
        assert_eq!(success_rate(&[0, 0]), Ok(0.0));
        assert_eq!(success_rate(&[1; 134]), Ok(100.0));
        assert_eq!(success_rate(&[1, 0, 0]), Ok(33.3));
        assert_eq!(success_rate(&[]), Err(EmptyRewards));
    }

    proptest! {
        #[test]
        fn success_rate_in_range(rewards in proptest::collection::vec(0u8..=1, 1..200)) {
            let sr = success_rate(&rewards).unwrap();
            prop_assert!((0.0..=100.0).contains(&sr));
            let exact = rewards.iter().map(|r| *r as f64).sum::<f64>() * 100.0 / rewards.len() as f64;
            prop_assert!((sr - exact).abs() <= 0.05 + 1e-9);
        }
    }
}
