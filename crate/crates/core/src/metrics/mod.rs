//! Per-run metrics, grouped aggregates and paired bootstrap deltas.

mod bootstrap;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::episode::RunRecord;
use crate::error::{Error, Result};
use crate::ledger::{reported_count_error, Outcome};
use crate::task::Family;

pub use bootstrap::{
    delta_csv, paired_bootstrap, percentile_interval, resampled_means, PairedDelta,
    DEFAULT_CONFIDENCE, DEFAULT_RESAMPLES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub task_id: String,
    pub family: Family,
    pub target_count: u32,
    pub controller: String,
    pub policy: String,
    pub success: u8,
    pub valid_count: u64,
    pub duplicate_submit_rate: f64,
    pub valid_per_step: f64,
    pub premature_stop: u8,
    pub false_completion: u8,
    pub budget_exhausted: u8,
    pub reported_count_error: Option<f64>,
    pub intervention_count: usize,
}

/// Duplicate occurrences over all submitted occurrences; zero when nothing
/// was submitted.
pub fn duplicate_submit_rate(duplicates: u64, occurrences: u64) -> f64 {
    if occurrences == 0 {
        0.0
    } else {
        duplicates as f64 / occurrences as f64
    }
}

pub fn compute_run_metrics(record: &RunRecord) -> Result<RunMetrics> {
    let outcome = record.outcome.ok_or_else(|| {
        Error::Unterminated(match &record.error {
            Some(e) => format!("{} ({e})", record.task_id),
            None => record.task_id.clone(),
        })
    })?;
    let flag = |o: Outcome| u8::from(outcome == o);
    Ok(RunMetrics {
        task_id: record.task_id.clone(),
        family: record.family,
        target_count: record.target_count,
        controller: record.controller.clone(),
        policy: record.policy.clone(),
        success: flag(Outcome::Success),
        valid_count: record.valid_count,
        duplicate_submit_rate: duplicate_submit_rate(
            record.duplicate_occurrences,
            record.submission_occurrences,
        ),
        valid_per_step: if record.steps_used == 0 {
            0.0
        } else {
            record.valid_count as f64 / record.steps_used as f64
        },
        premature_stop: flag(Outcome::PrematureStop),
        false_completion: flag(Outcome::FalseCompletion),
        budget_exhausted: flag(Outcome::BudgetExhausted),
        reported_count_error: record
            .reported_count
            .map(|r| reported_count_error(r, record.valid_count, record.target_count)),
        intervention_count: record.intervention_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Controller,
    Policy,
    Family,
    TargetCount,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Controller => "controller",
            GroupKey::Policy => "policy",
            GroupKey::Family => "family",
            GroupKey::TargetCount => "target_count",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            GroupKey::Controller,
            GroupKey::Policy,
            GroupKey::Family,
            GroupKey::TargetCount,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }

    fn value(self, m: &RunMetrics) -> KeyPart {
        match self {
            GroupKey::Controller => KeyPart::Text(m.controller.clone()),
            GroupKey::Policy => KeyPart::Text(m.policy.clone()),
            GroupKey::Family => KeyPart::Text(m.family.to_string()),
            GroupKey::TargetCount => KeyPart::Num(m.target_count as u64),
        }
    }
}

/// Group-key value; numbers sort numerically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum KeyPart {
    Num(u64),
    Text(String),
}

impl fmt::Display for KeyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyPart::Num(n) => write!(f, "{n}"),
            KeyPart::Text(s) => f.write_str(s),
        }
    }
}

/// Unweighted means over one group of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub key: Vec<KeyPart>,
    pub runs: usize,
    pub success: f64,
    pub avg_valid: f64,
    pub duplicate_submit_rate: f64,
    pub valid_per_step: f64,
    pub budget_exhausted: f64,
    pub premature_stop: f64,
    pub false_completion: f64,
    /// Scripted and adapter policies have no provider; always zero.
    pub provider_error: f64,
}

fn mean<F: Fn(&RunMetrics) -> f64>(rows: &[&RunMetrics], f: F) -> f64 {
    rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
}

pub fn aggregate(rows: &[RunMetrics], keys: &[GroupKey]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<Vec<KeyPart>, Vec<&RunMetrics>> = BTreeMap::new();
    for r in rows {
        groups
            .entry(keys.iter().map(|k| k.value(r)).collect())
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|(key, g)| AggregateRow {
            key,
            runs: g.len(),
            success: mean(&g, |r| r.success as f64),
            avg_valid: mean(&g, |r| r.valid_count as f64),
            duplicate_submit_rate: mean(&g, |r| r.duplicate_submit_rate),
            valid_per_step: mean(&g, |r| r.valid_per_step),
            budget_exhausted: mean(&g, |r| r.budget_exhausted as f64),
            premature_stop: mean(&g, |r| r.premature_stop as f64),
            false_completion: mean(&g, |r| r.false_completion as f64),
            provider_error: 0.0,
        })
        .collect()
}

pub const AGGREGATE_COLUMNS: [&str; 9] = [
    "runs",
    "succ",
    "avg_valid",
    "dup_rate",
    "valid_per_step",
    "budget_exh",
    "premature",
    "false_comp",
    "provider_error",
];

/// CSV in the column order: group keys, runs, succ, avg valid, dup rate,
/// valid/step, budget exh., premature, false comp., provider error.
pub fn aggregate_csv(rows: &[AggregateRow], keys: &[GroupKey]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = keys
        .iter()
        .map(|k| k.as_str())
        .chain(AGGREGATE_COLUMNS)
        .collect();
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.key.iter().map(ToString::to_string).collect();
        rec.push(r.runs.to_string());
        for v in [
            r.success,
            r.avg_valid,
            r.duplicate_submit_rate,
            r.valid_per_step,
            r.budget_exhausted,
            r.premature_stop,
            r.false_completion,
            r.provider_error,
        ] {
            rec.push(format!("{v:.3}"));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Indexes one condition's runs by task id. A task may appear once.
pub fn by_task(rows: &[RunMetrics]) -> Result<BTreeMap<String, RunMetrics>> {
    let mut out = BTreeMap::new();
    for r in rows {
        if out.insert(r.task_id.clone(), r.clone()).is_some() {
            return Err(Error::Config(format!("task {} appears more than once", r.task_id)));
        }
    }
    Ok(out)
}
