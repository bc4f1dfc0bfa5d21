use std::collections::{BTreeMap, BTreeSet};

use super::{action_name, gate_termination, Directive, InterventionKind, StepContext, NO_PROGRESS_STOP};
use crate::action::{Action, Observation, UnitOp, Verdict};
use crate::dataops::UnitStatus;

type Notes = Vec<(InterventionKind, String)>;

/// Steps a policy gets to submit a freshly passed unit on its own.
const SUBMIT_GRACE: u32 = 2;

/// Unit-status view and no-progress tracking for work-unit backlogs.
#[derive(Debug, Clone, Default)]
pub struct UnitQgpState {
    limit: u32,
    unit_status_view: BTreeMap<String, UnitStatus>,
    order: Vec<String>,
    last_action_per_unit: BTreeMap<String, &'static str>,
    last_progress_step: u32,
    steering_target: Option<String>,
    recoveries: u32,
    awaiting_check: Option<String>,
    passed_at: BTreeMap<String, u32>,
    counted: BTreeSet<String>,
    failed: BTreeSet<String>,
    routed_this_step: Option<String>,
    last_forwarded: Option<Action>,
    last_valid: u64,
}

impl UnitQgpState {
    pub fn new(no_progress_limit: u32) -> Self {
        UnitQgpState {
            limit: no_progress_limit.max(1),
            ..Default::default()
        }
    }

    pub fn recoveries(&self) -> u32 {
        self.recoveries
    }

    pub fn steering_target(&self) -> Option<&str> {
        self.steering_target.as_deref()
    }

    pub fn status(&self, unit_id: &str) -> Option<UnitStatus> {
        self.unit_status_view.get(unit_id).copied()
    }

    /// Completed steps since the last new pass or accepted submission.
    pub fn steps_without_progress(&self, step: u32) -> u32 {
        step.saturating_sub(1).saturating_sub(self.last_progress_step)
    }

    fn sync_units(&mut self, ctx: &StepContext<'_>) {
        if self.order.is_empty() && !ctx.units.is_empty() {
            for u in ctx.units {
                self.order.push(u.unit_id.clone());
                self.unit_status_view.insert(u.unit_id.clone(), UnitStatus::Pending);
            }
        }
    }

    fn first_open(&self, avoid: Option<&str>) -> Option<String> {
        let open = |u: &&String| self.unit_status_view.get(*u).is_some_and(|s| s.is_open());
        self.order
            .iter()
            .filter(open)
            .find(|u| Some(u.as_str()) != avoid)
            .or_else(|| self.order.iter().find(open))
            .cloned()
    }

    fn overdue_pass(&self, step: u32) -> Option<String> {
        self.order
            .iter()
            .find(|u| {
                self.passed_at
                    .get(*u)
                    .is_some_and(|&at| step > at + SUBMIT_GRACE)
            })
            .cloned()
    }

    pub fn transform(&mut self, action: &Action, ctx: &StepContext<'_>) -> (Directive, Notes) {
        self.sync_units(ctx);
        self.routed_this_step = None;
        let mut notes = Notes::new();
        let stall = self.steps_without_progress(ctx.step);

        if stall >= 2 * self.limit {
            notes.push((
                InterventionKind::NoProgressStop,
                format!("no verified progress for {stall} steps"),
            ));
            let notice = Observation::notice(NO_PROGRESS_STOP, ctx.valid_count, ctx.target_count);
            return (Directive::Halt(notice), notes);
        }
        if action.is_terminating() {
            return match gate_termination(action, ctx.valid_count, ctx.target_count) {
                Ok(a) => (Directive::Forward(a), notes),
                Err(notice) => {
                    notes.push((
                        InterventionKind::BlockedTermination,
                        format!(
                            "refused {} at {}/{}",
                            action_name(action),
                            ctx.valid_count,
                            ctx.target_count
                        ),
                    ));
                    (Directive::Block(notice), notes)
                }
            };
        }

        if let Some(unit) = self.awaiting_check.take() {
            let check = Action::RunCheck {
                unit_id: unit.clone(),
            };
            if *action != check {
                notes.push((
                    InterventionKind::RoutedToCheck,
                    format!("edit on {unit} not followed by a check"),
                ));
                self.routed_this_step = Some(unit);
                return (Directive::Forward(check), notes);
            }
            return (Directive::Forward(check), notes);
        }

        if let Some(unit) = self.overdue_pass(ctx.step) {
            let submit = Action::SubmitUnit {
                unit_id: unit.clone(),
            };
            if *action != submit {
                notes.push((
                    InterventionKind::RoutedToSubmit,
                    format!("{unit} passed but was not submitted"),
                ));
                self.routed_this_step = Some(unit);
            }
            return (Directive::Forward(submit), notes);
        }

        let stale = matches!(action, Action::Inspect { .. })
            || self.last_forwarded.as_ref() == Some(action);
        if stall >= self.limit && stale {
            if let Some(target) = self.first_open(action.unit_id()) {
                let inspect = Action::Inspect {
                    unit_id: target.clone(),
                };
                if *action != inspect {
                    notes.push((
                        InterventionKind::SteeredToUnit,
                        format!("stalled for {stall} steps; steered to {target}"),
                    ));
                    self.routed_this_step = Some(target.clone());
                    self.steering_target = Some(target);
                    return (Directive::Forward(inspect), notes);
                }
            }
        }
        (Directive::Forward(action.clone()), notes)
    }

    pub fn observe(&mut self, forwarded: &Action, observation: &Observation, ctx: &StepContext<'_>) {
        if let Some(unit) = forwarded.unit_id() {
            self.last_action_per_unit
                .insert(unit.to_owned(), action_name(forwarded));
        }
        self.last_forwarded = Some(forwarded.clone());
        match observation {
            Observation::UnitFeedback {
                unit_id,
                op,
                verdict,
                status_after: Some(after),
                ..
            } => {
                let before = self.unit_status_view.insert(unit_id.clone(), *after);
                if *op == UnitOp::Edit && *after != UnitStatus::Passed {
                    self.awaiting_check = Some(unit_id.clone());
                }
                if *verdict == Some(Verdict::Fail) {
                    self.failed.insert(unit_id.clone());
                }
                if *after == UnitStatus::Passed && before != Some(UnitStatus::Passed) {
                    self.last_progress_step = ctx.step;
                    if !self.counted.contains(unit_id) {
                        self.passed_at.insert(unit_id.clone(), ctx.step);
                    }
                    if self.failed.contains(unit_id)
                        && self.routed_this_step.as_deref() == Some(unit_id.as_str())
                    {
                        self.recoveries += 1;
                    }
                }
                if self.steering_target.as_deref() == Some(unit_id.as_str())
                    && !after.is_open()
                {
                    self.steering_target = None;
                }
            }
            Observation::SubmitFeedback {
                accepted,
                valid_count,
                ..
            } => {
                for id in accepted {
                    self.counted.insert(id.clone());
                    self.passed_at.remove(id);
                }
                if *valid_count > self.last_valid {
                    self.last_valid = *valid_count;
                    self.last_progress_step = ctx.step;
                }
            }
            _ => {}
        }
    }
}
