//! The action/observation algebra exchanged between policy, controller and
//! environment. Both sides serialize as internally tagged JSON objects, e.g.
//! `{"type":"search","query":"session","page":0}`.

use serde::{Deserialize, Serialize};

use crate::dataops::UnitStatus;
use crate::ledger::Outcome;
use crate::task::Family;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Search {
        query: String,
        page: u32,
    },
    Submit {
        ids: Vec<String>,
    },
    Inspect {
        unit_id: String,
    },
    Edit {
        unit_id: String,
        payload: String,
    },
    RunCheck {
        unit_id: String,
    },
    SubmitUnit {
        unit_id: String,
    },
    Final {
        completion_claim: bool,
        #[serde(default)]
        reported_count: Option<u64>,
    },
    AskUser {
        message: String,
    },
}

impl Action {
    pub fn is_terminating(&self) -> bool {
        matches!(self, Action::Final { .. } | Action::AskUser { .. })
    }

    pub fn is_legal_for(&self, family: Family) -> bool {
        match self {
            Action::Final { .. } | Action::AskUser { .. } => true,
            Action::Search { .. } | Action::Submit { .. } => family == Family::Reposcan,
            Action::Inspect { .. }
            | Action::Edit { .. }
            | Action::RunCheck { .. }
            | Action::SubmitUnit { .. } => family == Family::Dataops,
        }
    }

    /// The unit an action targets, for work-unit actions.
    pub fn unit_id(&self) -> Option<&str> {
        match self {
            Action::Inspect { unit_id }
            | Action::Edit { unit_id, .. }
            | Action::RunCheck { unit_id }
            | Action::SubmitUnit { unit_id } => Some(unit_id),
            _ => None,
        }
    }

    pub fn parse_line(line: &str) -> Result<Action, serde_json::Error> {
        serde_json::from_str(line.trim())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("actions always serialize")
    }
}

/// What a policy produced for one step: a well-formed action or raw text
/// that failed to parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    Action { action: Action },
    Malformed { raw: String },
}

impl Proposal {
    pub fn action(&self) -> Option<&Action> {
        match self {
            Proposal::Action { action } => Some(action),
            Proposal::Malformed { .. } => None,
        }
    }
}

impl From<Action> for Proposal {
    fn from(action: Action) -> Self {
        Proposal::Action { action }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub artifact_id: String,
    pub preview: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitOp {
    Inspect,
    Edit,
    Check,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Observation {
    SearchResults {
        query: String,
        page: u32,
        candidates: Vec<Candidate>,
    },
    SubmitFeedback {
        accepted: Vec<String>,
        rejected: Vec<String>,
        duplicates: Vec<String>,
        valid_count: u64,
        remaining: u64,
    },
    /// `verdict` is set only for checks; `status_after` is absent when the
    /// unit id was unknown.
    UnitFeedback {
        unit_id: String,
        op: UnitOp,
        verdict: Option<Verdict>,
        detail: String,
        status_after: Option<UnitStatus>,
        error: bool,
    },
    ControllerNotice {
        reason: String,
        valid_count: u64,
        remaining: u64,
    },
    Terminal {
        outcome: Outcome,
    },
}

impl Observation {
    pub fn notice(reason: impl Into<String>, valid_count: u64, target: u32) -> Self {
        Observation::ControllerNotice {
            reason: reason.into(),
            valid_count,
            remaining: (target as u64).saturating_sub(valid_count),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let a = Action::Search {
            query: "session".into(),
            page: 2,
        };
        assert_eq!(a.to_line(), r#"{"type":"search","query":"session","page":2}"#);
        let f = Action::parse_line(r#"{"type":"final","completion_claim":true}"#).unwrap();
        assert_eq!(
            f,
            Action::Final {
                completion_claim: true,
                reported_count: None
            }
        );
    }

    #[test]
    fn rejects_unknown_tags_and_fields() {
        assert!(Action::parse_line(r#"{"type":"explode"}"#).is_err());
        assert!(Action::parse_line(r#"{"type":"search","query":"a"}"#).is_err());
        assert!(Action::parse_line(r#"{"type":"submit","ids":[],"extra":1}"#).is_err());
        assert!(Action::parse_line("not json").is_err());
    }

    #[test]
    fn family_legality() {
        let search = Action::Search {
            query: "q".into(),
            page: 0,
        };
        let inspect = Action::Inspect {
            unit_id: "u1".into(),
        };
        let ask = Action::AskUser {
            message: "?".into(),
        };
        assert!(search.is_legal_for(Family::Reposcan));
        assert!(!search.is_legal_for(Family::Dataops));
        assert!(inspect.is_legal_for(Family::Dataops));
        assert!(!inspect.is_legal_for(Family::Reposcan));
        assert!(ask.is_legal_for(Family::Reposcan) && ask.is_legal_for(Family::Dataops));
    }
}
