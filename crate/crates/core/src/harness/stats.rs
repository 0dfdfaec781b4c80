use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::trace::{IterationTrace, METRICS};

/// Nearest-rank percentile of ascending `sorted`: the element at position
/// `⌈p/100 · n⌉`, counting from one.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let n = sorted.len();
    let rank = (p * n as f64 / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Percentiles of one metric at one iteration of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub iter: usize,
    pub metric: String,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessStats {
    pub trials: usize,
    /// Trials whose final column error is at most the success threshold.
    pub successes: usize,
    /// Trials where the method returned an error.
    pub failures: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub rows: Vec<AggregateRow>,
    pub success: BTreeMap<Method, SuccessStats>,
}

/// Percentile rows over traces grouped by method. Missing and NaN cells
/// are skipped; each method's rows are ordered by iteration, then metric.
pub fn aggregate(methods: &[Method], traces: &[(Method, &IterationTrace)]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &method in methods {
        let mine: Vec<&IterationTrace> = traces.iter().filter(|(m, _)| *m == method).map(|(_, t)| *t).collect();
        let max_rows = mine.iter().map(|t| t.len()).max().unwrap_or(0);
        for idx in 0..max_rows {
            let present: Vec<_> = mine.iter().filter_map(|t| t.rows.get(idx)).collect();
            let Some(iter) = present.first().map(|r| r.iter) else {
                continue;
            };
            for metric in METRICS {
                let mut values: Vec<f64> = present
                    .iter()
                    .filter_map(|r| r.metric(metric))
                    .filter(|v| !v.is_nan())
                    .collect();
                if values.is_empty() {
                    continue;
                }
                values.sort_by(f64::total_cmp);
                rows.push(AggregateRow {
                    method,
                    iter,
                    metric: metric.to_string(),
                    p5: percentile(&values, 5.0),
                    p50: percentile(&values, 50.0),
                    p95: percentile(&values, 95.0),
                });
            }
        }
    }
    rows
}
