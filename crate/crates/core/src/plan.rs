use serde::{Deserialize, Serialize};

use crate::geometry::Action;

/// How a planned episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanOutcome {
    Completed,
    /// No admissible action at step `step` while the target is incomplete.
    DeadEnd { step: usize },
    StepLimit,
}

impl PlanOutcome {
    pub fn is_completed(self) -> bool {
        self == PlanOutcome::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub outcome: PlanOutcome,
}
