//! Policies: deterministic scripted surrogates for known failure modes and a
//! line-protocol adapter for external policies.

mod external;
mod retrieval;
mod units;

use serde::{Deserialize, Serialize};

use crate::action::{Action, Proposal};
use crate::error::{Error, Result};
use crate::ledger::StepEntry;
use crate::task::{Family, PublicTaskView};

pub use external::{AdapterRequest, ExternalPolicy, DEFAULT_TIMEOUT_MS};
pub use retrieval::{greedy_oracle, redundant_searcher, restart_page, search_terms};
pub use units::{plan_edit, UnitWalker};

/// Chooses the next action from public task fields and the run history.
pub trait Policy {
    fn label(&self) -> String;

    /// `Err(Error::Adapter)` aborts the run; other errors are fatal.
    fn decide(&mut self, view: &PublicTaskView, history: &[StepEntry]) -> Result<Proposal>;

    /// Called once when the run ends.
    fn finish(&mut self) {}
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Duplicator,
    EarlyStopper {
        #[serde(default = "one")]
        stop_step: u32,
    },
    FalseCompleter {
        #[serde(default = "three")]
        stop_step: u32,
        /// Defaults to the task's target count.
        #[serde(default)]
        claim_count: Option<u64>,
    },
    NoSubmitLooper,
    GreedyOracle,
    Solver,
    RedundantSearcher,
    External {
        command: String,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
}

fn one() -> u32 {
    1
}

fn three() -> u32 {
    3
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

impl PolicySpec {
    /// Scripted policy by name with default parameters.
    pub fn scripted(name: &str) -> Option<Self> {
        Some(match name {
            "duplicator" => PolicySpec::Duplicator,
            "early_stopper" => PolicySpec::EarlyStopper { stop_step: 1 },
            "false_completer" => PolicySpec::FalseCompleter {
                stop_step: 3,
                claim_count: None,
            },
            "no_submit_looper" => PolicySpec::NoSubmitLooper,
            "greedy_oracle" => PolicySpec::GreedyOracle,
            "solver" => PolicySpec::Solver,
            "redundant_searcher" => PolicySpec::RedundantSearcher,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Duplicator => "duplicator",
            PolicySpec::EarlyStopper { .. } => "early_stopper",
            PolicySpec::FalseCompleter { .. } => "false_completer",
            PolicySpec::NoSubmitLooper => "no_submit_looper",
            PolicySpec::GreedyOracle => "greedy_oracle",
            PolicySpec::Solver => "solver",
            PolicySpec::RedundantSearcher => "redundant_searcher",
            PolicySpec::External { .. } => "external",
        }
    }

    /// A fresh policy instance for one run.
    pub fn build(&self) -> Result<Box<dyn Policy + Send>> {
        Ok(match self {
            PolicySpec::External {
                command,
                timeout_ms,
            } => Box::new(ExternalPolicy::spawn(command, *timeout_ms)?),
            scripted => Box::new(ScriptedPolicy::new(scripted.clone())),
        })
    }
}

/// Deterministic scripted policy. Identical task and history give an
/// identical action.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    spec: PolicySpec,
    walker: UnitWalker,
}

impl ScriptedPolicy {
    pub fn new(spec: PolicySpec) -> Self {
        let walker = match spec {
            PolicySpec::NoSubmitLooper => UnitWalker::looper(),
            _ => UnitWalker::solver(),
        };
        ScriptedPolicy { spec, walker }
    }

    pub fn solver() -> Self {
        Self::new(PolicySpec::Solver)
    }

    /// Best-effort honest progress for either family.
    fn work(&mut self, view: &PublicTaskView, history: &[StepEntry]) -> Action {
        match view.family {
            Family::Reposcan => greedy_oracle(view, history),
            Family::Dataops => self.walker.next(&view.units, history).unwrap_or(Action::Final {
                completion_claim: true,
                reported_count: Some(retrieval::last_valid_count(history)),
            }),
        }
    }
}

impl Policy for ScriptedPolicy {
    fn label(&self) -> String {
        self.spec.name().to_owned()
    }

    fn decide(&mut self, view: &PublicTaskView, history: &[StepEntry]) -> Result<Proposal> {
        let step = history.len() as u32 + 1;
        let action = match &self.spec {
            PolicySpec::Duplicator => match view.family {
                Family::Reposcan => retrieval::duplicator(view, history),
                Family::Dataops => {
                    let first = history.iter().find_map(|e| match &e.observation {
                        crate::action::Observation::SubmitFeedback { accepted, .. } => {
                            accepted.first().cloned()
                        }
                        _ => None,
                    });
                    match first {
                        Some(unit_id) => Action::SubmitUnit { unit_id },
                        None => self.work(view, history),
                    }
                }
            },
            PolicySpec::EarlyStopper { stop_step } => {
                if step >= *stop_step {
                    Action::AskUser {
                        message: "Should I keep going?".into(),
                    }
                } else {
                    self.work(view, history)
                }
            }
            PolicySpec::FalseCompleter {
                stop_step,
                claim_count,
            } => {
                let stop = (*stop_step).max(1);
                if step >= stop && (step - stop).is_multiple_of(stop) {
                    Action::Final {
                        completion_claim: true,
                        reported_count: Some(claim_count.unwrap_or(view.target_count as u64)),
                    }
                } else {
                    self.work(view, history)
                }
            }
            PolicySpec::NoSubmitLooper | PolicySpec::GreedyOracle | PolicySpec::Solver => {
                self.work(view, history)
            }
            PolicySpec::RedundantSearcher => match view.family {
                Family::Reposcan => redundant_searcher(view, history),
                Family::Dataops => self.work(view, history),
            },
            PolicySpec::External { .. } => {
                return Err(Error::Config(
                    "external policies run through ExternalPolicy".into(),
                ))
            }
        };
        Ok(Proposal::from(action))
    }
}
