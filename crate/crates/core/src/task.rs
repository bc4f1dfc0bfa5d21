//! Task instances and the policy-facing view of them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Reposcan,
    Dataops,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Reposcan => "reposcan",
            Family::Dataops => "dataops",
        })
    }
}

/// One task instance: environment family, objective, target count and budget.
///
/// `verifier_config` is an opaque key that the owning environment module
/// resolves against the hidden section of its manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub family: Family,
    pub objective: String,
    pub target_count: u32,
    pub budget: u32,
    pub seed: u64,
    pub verifier_config: String,
}

impl TaskSpec {
    pub fn new(
        task_id: impl Into<String>,
        family: Family,
        objective: impl Into<String>,
        target_count: u32,
        budget: u32,
        seed: u64,
        verifier_config: impl Into<String>,
    ) -> Result<Self> {
        let spec = TaskSpec {
            task_id: task_id.into(),
            family,
            objective: objective.into(),
            target_count,
            budget,
            seed,
            verifier_config: verifier_config.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_count == 0 {
            return Err(Error::Config(format!(
                "task {}: target_count must be at least 1",
                self.task_id
            )));
        }
        if self.budget == 0 {
            return Err(Error::Config(format!(
                "task {}: budget must be at least 1",
                self.task_id
            )));
        }
        Ok(())
    }
}

/// Unit description visible to policies. Carries no checker data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicUnit {
    pub unit_id: String,
    pub kind: crate::dataops::UnitKind,
    pub prompt: String,
    pub artifact_path: String,
}

/// What a policy is allowed to know about a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicTaskView {
    pub task_id: String,
    pub family: Family,
    pub objective: String,
    pub target_count: u32,
    pub budget: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<PublicUnit>,
}

impl PublicTaskView {
    pub fn from_task(task: &TaskSpec, units: Vec<PublicUnit>) -> Self {
        PublicTaskView {
            task_id: task.task_id.clone(),
            family: task.family,
            objective: task.objective.clone(),
            target_count: task.target_count,
            budget: task.budget,
            units,
        }
    }

    /// Backtick-quoted terms of the objective, in order of appearance.
    pub fn objective_terms(&self) -> Vec<String> {
        objective_terms(&self.objective)
    }
}

pub fn objective_terms(objective: &str) -> Vec<String> {
    objective
        .split('`')
        .skip(1)
        .step_by(2)
        .map(str::to_owned)
        .filter(|t| !t.trim().is_empty())
        .collect()
}

/// Budget per target count. Lookups outside the table are configuration errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetTable(pub BTreeMap<u32, u32>);

impl BudgetTable {
    pub fn reposcan() -> Self {
        BudgetTable([(10, 30), (25, 60), (50, 100), (100, 180)].into_iter().collect())
    }

    pub fn dataops() -> Self {
        BudgetTable([(3, 30), (5, 50), (10, 90), (20, 160)].into_iter().collect())
    }

    pub fn budget_for(&self, target: u32) -> Result<u32> {
        self.0
            .get(&target)
            .copied()
            .ok_or_else(|| Error::Config(format!("no budget configured for target {target}")))
    }

    pub fn targets(&self) -> Vec<u32> {
        self.0.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_target_and_budget() {
        assert!(TaskSpec::new("t", Family::Reposcan, "x", 0, 10, 0, "").is_err());
        assert!(TaskSpec::new("t", Family::Reposcan, "x", 1, 0, 0, "").is_err());
        assert!(TaskSpec::new("t", Family::Reposcan, "x", 1, 1, 0, "").is_ok());
    }

    #[test]
    fn budget_maps() {
        let r = BudgetTable::reposcan();
        assert_eq!(r.budget_for(25).unwrap(), 60);
        assert_eq!(r.budget_for(100).unwrap(), 180);
        let d = BudgetTable::dataops();
        assert_eq!(d.budget_for(10).unwrap(), 90);
        assert!(d.budget_for(7).is_err());
    }

    #[test]
    fn objective_terms_are_backtick_quoted() {
        let terms = objective_terms("Find 10 artifacts mentioning `session` or `adapter`.");
        assert_eq!(terms, vec!["session", "adapter"]);
        assert!(objective_terms("no terms here").is_empty());
    }
}
