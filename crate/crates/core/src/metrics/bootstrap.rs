use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RunMetrics;
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Success-rate difference between two conditions over their common tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    pub left: String,
    pub right: String,
    pub paired_tasks: usize,
    pub success_delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub avg_valid_delta: f64,
    pub left_only: usize,
    pub right_only: usize,
    pub resamples: usize,
    pub confidence: f64,
}

/// Means of `resamples` with-replacement resamples of `values`.
pub fn resampled_means(values: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(&[seed]);
    let n = values.len();
    (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect()
}

/// Empirical (type-1) percentile bounds at `(1-c)/2` and `1-(1-c)/2`.
/// The p-quantile of a sorted sample of size R is its `ceil(p*R)`-th value.
pub fn percentile_interval(sorted: &[f64], confidence: f64) -> (f64, f64) {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let r = sorted.len();
    let at = |p: f64| {
        // The epsilon absorbs representation error in p*R, e.g. 0.025*10000.
        let k = (p * r as f64 - 1e-9).ceil() as usize;
        sorted[k.clamp(1, r) - 1]
    };
    let tail = (1.0 - confidence) / 2.0;
    (at(tail), at(1.0 - tail))
}

pub fn paired_bootstrap(
    left_label: &str,
    left: &BTreeMap<String, RunMetrics>,
    right_label: &str,
    right: &BTreeMap<String, RunMetrics>,
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<PairedDelta> {
    if resamples == 0 {
        return Err(Error::Config("resamples must be positive".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!("confidence {confidence} outside (0, 1)")));
    }
    let common: Vec<(&RunMetrics, &RunMetrics)> = left
        .iter()
        .filter_map(|(task, l)| right.get(task).map(|r| (l, r)))
        .collect();
    if common.is_empty() {
        return Err(Error::NoCommonTasks);
    }
    let n = common.len() as f64;
    let diffs: Vec<f64> = common
        .iter()
        .map(|(l, r)| l.success as f64 - r.success as f64)
        .collect();
    let mut means = resampled_means(&diffs, resamples, seed);
    means.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = percentile_interval(&means, confidence);
    Ok(PairedDelta {
        left: left_label.to_owned(),
        right: right_label.to_owned(),
        paired_tasks: common.len(),
        success_delta: diffs.iter().sum::<f64>() / n,
        ci_low,
        ci_high,
        avg_valid_delta: common
            .iter()
            .map(|(l, r)| l.valid_count as f64 - r.valid_count as f64)
            .sum::<f64>()
            / n,
        left_only: common.iter().filter(|(l, r)| l.success == 1 && r.success == 0).count(),
        right_only: common.iter().filter(|(l, r)| l.success == 0 && r.success == 1).count(),
        resamples,
        confidence,
    })
}

pub fn delta_csv(deltas: &[PairedDelta]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "left",
        "right",
        "paired_tasks",
        "succ_delta",
        "ci_low",
        "ci_high",
        "avg_valid_delta",
        "left_only",
        "right_only",
        "resamples",
        "confidence",
    ])?;
    for d in deltas {
        w.write_record([
            d.left.clone(),
            d.right.clone(),
            d.paired_tasks.to_string(),
            format!("{:.3}", d.success_delta),
            format!("{:.3}", d.ci_low),
            format!("{:.3}", d.ci_high),
            format!("{:.3}", d.avg_valid_delta),
            d.left_only.to_string(),
            d.right_only.to_string(),
            d.resamples.to_string(),
            format!("{:.3}", d.confidence),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
