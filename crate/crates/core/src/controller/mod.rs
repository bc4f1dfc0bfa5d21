//! Execution contracts between policy and environment.

mod state;
mod unit;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::{Action, Observation};
use crate::task::PublicUnit;

pub use state::{fallback_query, StateFeatures, StateQgpState};
pub use unit::UnitQgpState;

/// Notice reason for a termination refused while the target is unmet.
pub const TARGET_UNMET: &str = "target_unmet";
/// Notice reason for UnitQGP giving up after a long stall.
pub const NO_PROGRESS_STOP: &str = "no_progress_stop";
pub const DEFAULT_NO_PROGRESS_LIMIT: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Standard,
    VerifierGated,
    StateQgp,
    UnitQgp,
    Ablation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationFlags {
    DedupeOnly,
    PageMemoryOnly,
    DedupePlusPageNoBuffer,
}

impl AblationFlags {
    pub const ALL: [AblationFlags; 3] = [
        AblationFlags::DedupeOnly,
        AblationFlags::PageMemoryOnly,
        AblationFlags::DedupePlusPageNoBuffer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationFlags::DedupeOnly => "dedupe_only",
            AblationFlags::PageMemoryOnly => "page_memory_only",
            AblationFlags::DedupePlusPageNoBuffer => "dedupe_plus_page_no_buffer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationFlags>,
    #[serde(default = "default_limit")]
    pub no_progress_limit: u32,
}

fn default_limit() -> u32 {
    DEFAULT_NO_PROGRESS_LIMIT
}

impl ControllerConfig {
    fn of(kind: ControllerKind) -> Self {
        ControllerConfig {
            kind,
            ablation: None,
            no_progress_limit: DEFAULT_NO_PROGRESS_LIMIT,
        }
    }

    pub fn standard() -> Self {
        Self::of(ControllerKind::Standard)
    }

    pub fn verifier_gated() -> Self {
        Self::of(ControllerKind::VerifierGated)
    }

    pub fn state_qgp() -> Self {
        Self::of(ControllerKind::StateQgp)
    }

    pub fn unit_qgp(no_progress_limit: u32) -> Self {
        ControllerConfig {
            no_progress_limit,
            ..Self::of(ControllerKind::UnitQgp)
        }
    }

    pub fn ablation(flags: AblationFlags) -> Self {
        ControllerConfig {
            ablation: Some(flags),
            ..Self::of(ControllerKind::Ablation)
        }
    }

    /// Parses `standard`, `verifier_gated`, `state_qgp`, `unit_qgp` or
    /// `ablation:<flags>`.
    pub fn parse(label: &str) -> Option<Self> {
        match label {
            "standard" => Some(Self::standard()),
            "verifier_gated" => Some(Self::verifier_gated()),
            "state_qgp" => Some(Self::state_qgp()),
            "unit_qgp" => Some(Self::unit_qgp(DEFAULT_NO_PROGRESS_LIMIT)),
            other => other
                .strip_prefix("ablation:")
                .and_then(AblationFlags::parse)
                .map(Self::ablation),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_owned()));
        match (self.kind, self.ablation) {
            (ControllerKind::Ablation, None) => bad("ablation controller needs ablation flags"),
            (ControllerKind::Ablation, Some(_)) => Ok(()),
            (_, Some(_)) => bad("ablation flags are only meaningful for the ablation controller"),
            _ if self.no_progress_limit == 0 => bad("no_progress_limit must be positive"),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            ControllerKind::Standard => "standard".into(),
            ControllerKind::VerifierGated => "verifier_gated".into(),
            ControllerKind::StateQgp => "state_qgp".into(),
            ControllerKind::UnitQgp => "unit_qgp".into(),
            ControllerKind::Ablation => format!(
                "ablation:{}",
                self.ablation.map(AblationFlags::as_str).unwrap_or("unset")
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    BlockedTermination,
    DedupFiltered,
    PageAdvanced,
    RepairedToSearch,
    SteeredToUnit,
    RoutedToCheck,
    RoutedToSubmit,
    NoProgressStop,
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("kind serializes");
        f.write_str(v.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    pub step: u32,
    pub kind: InterventionKind,
    pub detail: String,
}

/// What the controller does with a proposed action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    Forward(Action),
    /// Refused; the notice is returned to the policy.
    Block(Observation),
    /// The controller ends the run as budget-exhausted.
    Halt(Observation),
}

/// Public run state visible to controllers at one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub step: u32,
    pub valid_count: u64,
    pub target_count: u32,
    pub objective: &'a str,
    pub units: &'a [PublicUnit],
}

/// Passthrough: the identity on well-formed actions.
pub fn standard_transform(action: &Action) -> Action {
    action.clone()
}

/// Refuses `Final`/`AskUser` while the verified count is below target.
pub fn gate_termination(action: &Action, valid_count: u64, target_count: u32) -> Result<Action, Observation> {
    if action.is_terminating() && !crate::ledger::is_complete(valid_count, target_count) {
        let remaining = (target_count as u64).saturating_sub(valid_count);
        Err(Observation::ControllerNotice {
            reason: format!("{TARGET_UNMET}: {remaining} verified items still needed"),
            valid_count,
            remaining,
        })
    } else {
        Ok(action.clone())
    }
}

#[derive(Debug, Clone)]
enum State {
    Stateless,
    Retrieval(StateQgpState, StateFeatures),
    Units(UnitQgpState),
}

/// A configured controller plus its run-confined state and intervention log.
///
/// Controllers see only actions, observations and public task fields.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    state: State,
    log: Vec<Intervention>,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        let state = match config.kind {
            ControllerKind::Standard | ControllerKind::VerifierGated => State::Stateless,
            ControllerKind::StateQgp => {
                State::Retrieval(StateQgpState::default(), StateFeatures::full())
            }
            ControllerKind::Ablation => State::Retrieval(
                StateQgpState::default(),
                StateFeatures::ablation(config.ablation.unwrap_or(AblationFlags::DedupeOnly)),
            ),
            ControllerKind::UnitQgp => State::Units(UnitQgpState::new(config.no_progress_limit)),
        };
        Controller {
            config,
            state,
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn label(&self) -> String {
        self.config.label()
    }

    pub fn interventions(&self) -> &[Intervention] {
        &self.log
    }

    /// Verifier recoveries seen by UnitQGP; zero for other controllers.
    pub fn recoveries(&self) -> u32 {
        match &self.state {
            State::Units(s) => s.recoveries(),
            _ => 0,
        }
    }

    pub fn transform(&mut self, action: &Action, ctx: &StepContext<'_>) -> Directive {
        let mut notes = Vec::new();
        let directive = match (&mut self.state, self.config.kind) {
            (State::Stateless, ControllerKind::Standard) => {
                Directive::Forward(standard_transform(action))
            }
            (State::Stateless, _) => gate(action, ctx, &mut notes),
            (State::Retrieval(state, features), _) => {
                if features.gate && action.is_terminating() {
                    gate(action, ctx, &mut notes)
                } else {
                    let (a, n) = state.transform(action, *features, ctx.objective);
                    notes = n;
                    Directive::Forward(a)
                }
            }
            (State::Units(state), _) => {
                let (d, n) = state.transform(action, ctx);
                notes = n;
                d
            }
        };
        for (kind, detail) in notes {
            self.log.push(Intervention {
                step: ctx.step,
                kind,
                detail,
            });
        }
        directive
    }

    /// Feeds back the observation produced for a forwarded action.
    pub fn observe(&mut self, forwarded: &Action, observation: &Observation, ctx: &StepContext<'_>) {
        match &mut self.state {
            State::Stateless => {}
            State::Retrieval(state, _) => state.observe(forwarded, observation),
            State::Units(state) => state.observe(forwarded, observation, ctx),
        }
    }
}

fn gate(action: &Action, ctx: &StepContext<'_>, notes: &mut Vec<(InterventionKind, String)>) -> Directive {
    match gate_termination(action, ctx.valid_count, ctx.target_count) {
        Ok(a) => Directive::Forward(a),
        Err(notice) => {
            notes.push((
                InterventionKind::BlockedTermination,
                format!("refused {} at {}/{}", action_name(action), ctx.valid_count, ctx.target_count),
            ));
            Directive::Block(notice)
        }
    }
}

pub(crate) fn action_name(action: &Action) -> &'static str {
    match action {
        Action::Search { .. } => "search",
        Action::Submit { .. } => "submit",
        Action::Inspect { .. } => "inspect",
        Action::Edit { .. } => "edit",
        Action::RunCheck { .. } => "run_check",
        Action::SubmitUnit { .. } => "submit_unit",
        Action::Final { .. } => "final",
        Action::AskUser { .. } => "ask_user",
    }
}
