use std::collections::BTreeMap;

use super::backlog::Backlog;
use super::checker::evaluate;
use super::unit::UnitStatus;
use super::workspace::Workspace;
use crate::action::{Action, Observation, UnitOp, Verdict};
use crate::episode::Environment;
use crate::error::{Error, Result};
use crate::ledger::RunLedger;
use crate::task::{Family, PublicUnit};
use crate::verifier::{normalize_id, Acceptance};

/// Longest artifact excerpt returned by an inspection.
pub const MAX_EXCERPT_CHARS: usize = 8192;
const EXCERPT_MARKER: &str = "\n--- ";

/// Inspection text: prompt, status, then the artifact under a `--- path ---`
/// header line.
pub fn inspection_detail(prompt: &str, status: UnitStatus, path: &str, content: Option<&str>) -> String {
    let status = serde_json::to_value(status).expect("status serializes");
    let body = match content {
        Some(text) => text.chars().take(MAX_EXCERPT_CHARS).collect::<String>(),
        None => "(artifact missing)\n".to_owned(),
    };
    format!(
        "{prompt}\nstatus: {}{EXCERPT_MARKER}{path} ---\n{body}",
        status.as_str().unwrap_or_default()
    )
}

/// The artifact part of an inspection detail.
pub fn excerpt_of(detail: &str) -> Option<&str> {
    let start = detail.find(EXCERPT_MARKER)? + EXCERPT_MARKER.len();
    let rest = &detail[start..];
    Some(&rest[rest.find('\n')? + 1..])
}

/// Serves unit actions over one backlog and its private workspace.
pub struct DataOpsEnv {
    backlog: Backlog,
    workspace: Workspace,
    status: BTreeMap<String, UnitStatus>,
    acceptance: Acceptance,
    inspected_at: BTreeMap<String, u32>,
}

impl DataOpsEnv {
    pub fn new(backlog: Backlog) -> Result<Self> {
        let workspace = Workspace::materialize(&backlog.files)?;
        let status = backlog
            .units
            .iter()
            .map(|u| (u.unit_id.clone(), UnitStatus::Pending))
            .collect();
        Ok(DataOpsEnv {
            backlog,
            workspace,
            status,
            acceptance: Acceptance::default(),
            inspected_at: BTreeMap::new(),
        })
    }

    pub fn status(&self, unit_id: &str) -> Option<UnitStatus> {
        self.status.get(unit_id).copied()
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn last_inspected(&self, unit_id: &str) -> Option<u32> {
        self.inspected_at.get(unit_id).copied()
    }

    fn unknown(unit_id: &str, op: UnitOp) -> Observation {
        Observation::UnitFeedback {
            unit_id: unit_id.to_owned(),
            op,
            verdict: None,
            detail: format!("unknown unit `{unit_id}`"),
            status_after: None,
            error: true,
        }
    }
}

impl Environment for DataOpsEnv {
    fn family(&self) -> Family {
        Family::Dataops
    }

    fn public_units(&self) -> Vec<PublicUnit> {
        self.backlog.public_units()
    }

    fn apply(&mut self, action: &Action, ledger: &mut RunLedger, target: u32) -> Result<Observation> {
        match action {
            Action::Inspect { unit_id } => {
                let Some(unit) = self.backlog.unit(unit_id) else {
                    return Ok(Self::unknown(unit_id, UnitOp::Inspect));
                };
                let status = self.status[unit_id];
                self.inspected_at.insert(unit_id.clone(), ledger.step);
                let content = self.workspace.read(&unit.artifact_path);
                Ok(Observation::UnitFeedback {
                    unit_id: unit_id.clone(),
                    op: UnitOp::Inspect,
                    verdict: None,
                    detail: inspection_detail(&unit.prompt, status, &unit.artifact_path, content.as_deref()),
                    status_after: Some(status),
                    error: false,
                })
            }
            Action::Edit { unit_id, payload } => {
                let Some(unit) = self.backlog.unit(unit_id).cloned() else {
                    return Ok(Self::unknown(unit_id, UnitOp::Edit));
                };
                let status = self.status[unit_id];
                if status == UnitStatus::Passed {
                    return Ok(Observation::UnitFeedback {
                        unit_id: unit_id.clone(),
                        op: UnitOp::Edit,
                        verdict: None,
                        detail: "unit already passed; edit ignored".into(),
                        status_after: Some(status),
                        error: false,
                    });
                }
                let result = self.workspace.apply_edit(&unit, payload);
                let after = status.attempted();
                self.status.insert(unit_id.clone(), after);
                let (detail, error) = match result {
                    Ok(d) => (d, false),
                    Err(e) => (e, true),
                };
                Ok(Observation::UnitFeedback {
                    unit_id: unit_id.clone(),
                    op: UnitOp::Edit,
                    verdict: None,
                    detail,
                    status_after: Some(after),
                    error,
                })
            }
            Action::RunCheck { unit_id } => {
                let Some(unit) = self.backlog.unit(unit_id) else {
                    return Ok(Self::unknown(unit_id, UnitOp::Check));
                };
                let status = self.status[unit_id];
                let result = evaluate(&unit.checker, self.workspace.root(), unit_id);
                let after = if result.pass {
                    UnitStatus::Passed
                } else {
                    status.attempted()
                };
                self.status.insert(unit_id.clone(), after);
                Ok(Observation::UnitFeedback {
                    unit_id: unit_id.clone(),
                    op: UnitOp::Check,
                    verdict: Some(if result.pass { Verdict::Pass } else { Verdict::Fail }),
                    detail: result.diagnostic,
                    status_after: Some(after),
                    error: false,
                })
            }
            Action::SubmitUnit { unit_id } => {
                let id = normalize_id(unit_id).to_owned();
                let passed = self.status.get(&id) == Some(&UnitStatus::Passed);
                let verdicts = BTreeMap::from([(id.clone(), passed)]);
                let part = ledger.record_submission(std::slice::from_ref(&id), &verdicts)?;
                self.acceptance.judge(std::slice::from_ref(&id), |_| passed);
                debug_assert_eq!(self.acceptance.accepted_count() as u64, ledger.valid_count());
                Ok(Observation::SubmitFeedback {
                    accepted: part.accepted,
                    rejected: part.rejected,
                    duplicates: part.duplicates,
                    valid_count: ledger.valid_count(),
                    remaining: ledger.remaining(target),
                })
            }
            other => Err(Error::Config(format!(
                "action {} is not served by the work-unit environment",
                other.to_line()
            ))),
        }
    }

    fn verified_count(&self) -> u64 {
        self.acceptance.accepted_count() as u64
    }
}
