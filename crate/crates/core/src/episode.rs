//! The run loop: policy proposes, controller transforms, environment and
//! verifier answer, ledger records.

use serde::{Deserialize, Serialize};

use crate::action::{Action, Observation};
use crate::controller::{Controller, Directive, Intervention, StepContext};
use crate::error::{Error, Result};
use crate::ledger::{classify_termination, is_complete, Outcome, RunLedger, StepEntry, Termination};
use crate::policy::Policy;
use crate::task::{Family, PublicTaskView, PublicUnit, TaskSpec};

/// Notice reason for unparseable policy output.
pub const PARSE_ERROR: &str = "parse_error";
/// Notice reason for an action outside the task family's vocabulary.
pub const ILLEGAL_ACTION: &str = "illegal_action";

/// A task environment bundled with its verifier.
pub trait Environment {
    fn family(&self) -> Family;

    fn public_units(&self) -> Vec<PublicUnit> {
        Vec::new()
    }

    /// Applies a non-terminating action legal for this family.
    fn apply(&mut self, action: &Action, ledger: &mut RunLedger, target: u32) -> Result<Observation>;

    /// Count held by the verifier; must agree with the ledger.
    fn verified_count(&self) -> u64;
}

/// One line of run output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub family: Family,
    pub target_count: u32,
    pub budget: u32,
    pub controller: String,
    pub policy: String,
    pub outcome: Option<Outcome>,
    pub valid_count: u64,
    pub steps_used: u32,
    pub duplicate_occurrences: u64,
    pub submission_occurrences: u64,
    pub reported_count: Option<u64>,
    pub intervention_count: usize,
    #[serde(default)]
    pub intervention_log: Vec<Intervention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("run records serialize")
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub record: RunRecord,
    pub ledger: RunLedger,
}

fn record(
    task: &TaskSpec,
    controller: &Controller,
    policy: &dyn Policy,
    ledger: &RunLedger,
    error: Option<String>,
) -> RunRecord {
    RunRecord {
        task_id: task.task_id.clone(),
        family: task.family,
        target_count: task.target_count,
        budget: task.budget,
        controller: controller.label(),
        policy: policy.label(),
        outcome: ledger.outcome(),
        valid_count: ledger.valid_count(),
        steps_used: ledger.step,
        duplicate_occurrences: ledger.duplicate_occurrences(),
        submission_occurrences: ledger.submission_occurrences(),
        reported_count: ledger.reported_count,
        intervention_count: controller.interventions().len(),
        intervention_log: controller.interventions().to_vec(),
        error,
    }
}

/// Runs one task to termination.
///
/// Every policy decision consumes one step, including malformed, illegal,
/// blocked and rewritten ones. Success is checked after each step's
/// feedback, so reaching the target on the last step is a success.
pub fn run_episode(
    task: &TaskSpec,
    env: &mut dyn Environment,
    controller: &mut Controller,
    policy: &mut dyn Policy,
) -> Result<Episode> {
    task.validate()?;
    if env.family() != task.family {
        return Err(Error::Config(format!(
            "task {} is {} but the environment serves {}",
            task.task_id,
            task.family,
            env.family()
        )));
    }
    let view = PublicTaskView::from_task(task, env.public_units());
    let target = task.target_count;
    let mut ledger = RunLedger::new();
    let mut outcome = None;

    while ledger.step < task.budget {
        let proposal = match policy.decide(&view, &ledger.history) {
            Ok(p) => p,
            Err(Error::Adapter(msg)) => {
                policy.finish();
                let record = record(task, controller, policy, &ledger, Some(msg));
                return Ok(Episode { record, ledger });
            }
            Err(e) => return Err(e),
        };
        ledger.step += 1;
        let valid = ledger.valid_count();
        let ctx = StepContext {
            step: ledger.step,
            valid_count: valid,
            target_count: target,
            objective: &task.objective,
            units: &view.units,
        };

        let (forwarded, observation) = match proposal.action() {
            None => (None, Observation::notice(PARSE_ERROR, valid, target)),
            Some(a) if !a.is_legal_for(task.family) => {
                (None, Observation::notice(ILLEGAL_ACTION, valid, target))
            }
            Some(a) => {
                if let Action::Final {
                    reported_count: Some(r),
                    ..
                } = a
                {
                    ledger.reported_count = Some(*r);
                }
                match controller.transform(a, &ctx) {
                    Directive::Block(notice) => (None, notice),
                    Directive::Halt(notice) => {
                        outcome = Some(Outcome::BudgetExhausted);
                        (None, notice)
                    }
                    Directive::Forward(f) if f.is_terminating() => {
                        let o = classify_termination(valid, Termination::Action(&f), target);
                        outcome = Some(o);
                        (Some(f), Observation::Terminal { outcome: o })
                    }
                    Directive::Forward(f) => {
                        let obs = env.apply(&f, &mut ledger, target)?;
                        controller.observe(&f, &obs, &ctx);
                        (Some(f), obs)
                    }
                }
            }
        };
        if env.verified_count() != ledger.valid_count() {
            return Err(Error::Config(format!(
                "verifier count {} disagrees with ledger count {} at step {}",
                env.verified_count(),
                ledger.valid_count(),
                ledger.step
            )));
        }
        ledger.history.push(StepEntry {
            step: ledger.step,
            proposed: proposal,
            forwarded,
            observation,
        });
        if outcome.is_some() {
            break;
        }
        if is_complete(ledger.valid_count(), target) {
            outcome = Some(Outcome::Success);
            break;
        }
    }

    let outcome = outcome.unwrap_or_else(|| {
        classify_termination(ledger.valid_count(), Termination::BudgetExhausted, target)
    });
    ledger.terminate(outcome)?;
    policy.finish();
    let record = record(task, controller, policy, &ledger, None);
    Ok(Episode { record, ledger })
}
