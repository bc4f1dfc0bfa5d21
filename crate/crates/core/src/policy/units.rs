//! Prompt parsing and per-unit progress tracking for work-unit policies.

use std::collections::BTreeSet;

use crate::action::{Action, Observation, UnitOp, Verdict};
use crate::dataops::{excerpt_of, parse_metadata, CsvTable, EditOp, UnitKind, UnitStatus};
use crate::ledger::StepEntry;
use crate::task::{objective_terms, PublicUnit};

/// The edit a unit needs given its inspected artifact, or `None` when the
/// artifact already satisfies the prompt. Answer units always need an edit.
pub fn plan_edit(unit: &PublicUnit, excerpt: &str) -> Option<EditOp> {
    let terms = objective_terms(&unit.prompt);
    match unit.kind {
        UnitKind::CsvFieldCheck => {
            let [_, row, column, value] = terms.as_slice() else {
                return None;
            };
            let table = CsvTable::parse(excerpt).ok()?;
            let current = table
                .row_index(row)
                .zip(table.column(column))
                .map(|(r, c)| table.rows[r][c].as_str());
            (current != Some(value.as_str())).then(|| EditOp::SetCell {
                row: row.clone(),
                column: column.clone(),
                value: value.clone(),
            })
        }
        UnitKind::CsvCountCheck => {
            let count: usize = terms.get(1)?.parse().ok()?;
            let table = CsvTable::parse(excerpt).ok()?;
            (table.rows.len() != count).then_some(EditOp::KeepRows { count })
        }
        UnitKind::MetadataRepair => {
            let [_, key, value] = terms.as_slice() else {
                return None;
            };
            (parse_metadata(excerpt).get(key) != Some(value)).then(|| EditOp::SetKey {
                key: key.clone(),
                value: value.clone(),
            })
        }
        UnitKind::ConsistencyAnswer => {
            let value = match terms.as_slice() {
                [_, column, value] => {
                    let table = CsvTable::parse(excerpt).ok()?;
                    let c = table.column(column)?;
                    table.rows.iter().filter(|r| r[c] == *value).count().to_string()
                }
                [_, key] => parse_metadata(excerpt).get(key)?.clone(),
                _ => return None,
            };
            Some(EditOp::Answer { value })
        }
        UnitKind::ArtifactValidation => {
            let prefix = terms.get(1)?;
            excerpt
                .lines()
                .any(|l| l.starts_with(prefix.as_str()))
                .then(|| EditOp::StripLines {
                    prefix: prefix.clone(),
                })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    Inspect,
    Edit(EditOp),
    Check,
    Submit,
}

/// Walks a backlog unit by unit, driven by observations.
///
/// With `submit` off it never checks an edited unit and never submits, which
/// reproduces the no-submit loop.
#[derive(Debug, Clone)]
pub struct UnitWalker {
    submit: bool,
    skip_answers: bool,
    cursor: usize,
    phase: Phase,
    failures: u32,
    passed: BTreeSet<String>,
    counted: BTreeSet<String>,
    given_up: BTreeSet<String>,
    processed: usize,
}

impl UnitWalker {
    pub fn solver() -> Self {
        Self::new(true, false)
    }

    pub fn looper() -> Self {
        Self::new(false, true)
    }

    fn new(submit: bool, skip_answers: bool) -> Self {
        UnitWalker {
            submit,
            skip_answers,
            cursor: 0,
            phase: Phase::Inspect,
            failures: 0,
            passed: BTreeSet::new(),
            counted: BTreeSet::new(),
            given_up: BTreeSet::new(),
            processed: 0,
        }
    }

    fn eligible(&self, u: &PublicUnit) -> bool {
        !(self.skip_answers && u.kind == UnitKind::ConsistencyAnswer)
            && !self.counted.contains(&u.unit_id)
            && !self.given_up.contains(&u.unit_id)
            && (self.submit || !self.passed.contains(&u.unit_id))
    }

    fn advance(&mut self, units: &[PublicUnit]) {
        self.failures = 0;
        let n = units.len();
        for step in 1..=n {
            let i = (self.cursor + step) % n;
            if self.submit && i < self.cursor {
                break;
            }
            if self.eligible(&units[i]) {
                self.cursor = i;
                self.phase = self.initial_phase(&units[i]);
                return;
            }
        }
        self.cursor = n;
    }

    fn initial_phase(&self, unit: &PublicUnit) -> Phase {
        if self.submit && self.passed.contains(&unit.unit_id) {
            Phase::Submit
        } else {
            Phase::Inspect
        }
    }

    fn current<'a>(&self, units: &'a [PublicUnit]) -> Option<&'a PublicUnit> {
        units.get(self.cursor)
    }

    fn absorb(&mut self, units: &[PublicUnit], obs: &Observation) {
        match obs {
            Observation::SubmitFeedback {
                accepted,
                duplicates,
                ..
            } => {
                for id in accepted.iter().chain(duplicates) {
                    self.counted.insert(id.clone());
                }
                if self
                    .current(units)
                    .is_some_and(|u| self.counted.contains(&u.unit_id))
                {
                    self.advance(units);
                }
            }
            Observation::UnitFeedback {
                unit_id,
                op,
                verdict,
                detail,
                status_after,
                error,
            } => {
                if *status_after == Some(UnitStatus::Passed) {
                    self.passed.insert(unit_id.clone());
                }
                let Some(cur) = self.current(units) else {
                    return;
                };
                if cur.unit_id != *unit_id {
                    if !self.submit && *op == UnitOp::Inspect && !error {
                        if let Some(i) = units.iter().position(|u| u.unit_id == *unit_id) {
                            self.cursor = i;
                        } else {
                            return;
                        }
                    } else {
                        return;
                    }
                }
                let cur = &units[self.cursor];
                match op {
                    UnitOp::Inspect => {
                        if self.submit && self.passed.contains(&cur.unit_id) {
                            self.phase = Phase::Submit;
                            return;
                        }
                        let plan = excerpt_of(detail).and_then(|e| plan_edit(cur, e));
                        self.phase = match plan {
                            Some(op) => Phase::Edit(op),
                            None => Phase::Check,
                        };
                    }
                    UnitOp::Edit => {
                        if self.submit {
                            self.phase = Phase::Check;
                        } else {
                            self.advance(units);
                        }
                    }
                    UnitOp::Check => {
                        if !self.submit {
                            self.advance(units);
                        } else if *verdict == Some(Verdict::Pass) {
                            self.phase = Phase::Submit;
                        } else {
                            self.failures += 1;
                            if self.failures >= 2 {
                                self.given_up.insert(cur.unit_id.clone());
                                self.advance(units);
                            } else {
                                self.phase = Phase::Inspect;
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }

    /// Next action, or `None` once every unit has been handled.
    pub fn next(&mut self, units: &[PublicUnit], history: &[StepEntry]) -> Option<Action> {
        if units.is_empty() {
            return None;
        }
        if self.processed == 0 && !self.eligible(&units[0]) {
            self.cursor = units.len() - 1;
            self.advance(units);
        }
        for entry in &history[self.processed..] {
            self.absorb(units, &entry.observation);
        }
        self.processed = history.len();
        if !self.submit && self.cursor >= units.len() {
            // Every eligible unit has passed; keep cycling through them.
            self.passed.clear();
            self.cursor = units.len() - 1;
            self.advance(units);
        }
        let unit = self.current(units)?;
        let unit_id = unit.unit_id.clone();
        Some(match &self.phase {
            Phase::Inspect => Action::Inspect { unit_id },
            Phase::Edit(op) => Action::Edit {
                unit_id,
                payload: op.to_payload(),
            },
            Phase::Check => Action::RunCheck { unit_id },
            Phase::Submit => Action::SubmitUnit { unit_id },
        })
    }
}
