use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::runner::ExperimentResult;
use super::stats::AggregateRow;
use crate::error::{Error, Result};
use crate::trace::{format_cell, TRACE_COLUMNS};

pub const TRACES_HEADER: &str = "trial,method,iter,tan_A,tan_B,tan_C,err_A,err_B,err_C,residual,wall_ms";
pub const AGGREGATE_HEADER: &str = "method,iter,metric,p5,p50,p95";

/// Files written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub traces: PathBuf,
    pub aggregate: PathBuf,
    pub config: PathBuf,
    pub summary: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            traces: dir.join("traces.csv"),
            aggregate: dir.join("aggregate.csv"),
            config: dir.join("config.json"),
            summary: dir.join("summary.json"),
        }
    }
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

/// Writes `traces.csv`, `aggregate.csv`, `config.json` and `summary.json`.
pub fn emit_outputs(result: &ExperimentResult, paths: &OutputPaths) -> Result<()> {
    result.config.validate()?;
    for p in [&paths.traces, &paths.aggregate, &paths.config, &paths.summary] {
        ensure_parent(p)?;
    }

    let mut w = csv::Writer::from_path(&paths.traces)?;
    let header: Vec<&str> = ["trial", "method"].into_iter().chain(TRACE_COLUMNS).collect();
    w.write_record(&header)?;
    for trial in &result.trials {
        for outcome in &trial.outcomes {
            let Some(trace) = &outcome.trace else { continue };
            for row in &trace.rows {
                let mut rec = vec![trial.trial.to_string(), outcome.method.tag().to_string()];
                rec.extend(row.cells());
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths.aggregate)?;
    w.write_record(AGGREGATE_HEADER.split(','))?;
    for row in &result.stats.rows {
        w.write_record([
            row.method.tag().to_string(),
            row.iter.to_string(),
            row.metric.clone(),
            format_cell(Some(row.p5)),
            format_cell(Some(row.p50)),
            format_cell(Some(row.p95)),
        ])?;
    }
    w.flush()?;

    fs::write(&paths.config, result.config.to_json()? + "\n")?;

    let failures: Vec<_> = result
        .trials
        .iter()
        .flat_map(|t| {
            t.outcomes.iter().filter_map(move |o| {
                o.error
                    .as_ref()
                    .map(|e| json!({"trial": t.trial, "method": o.method, "error": e}))
            })
        })
        .collect();
    let summary = json!({
        "noise_norm": result.trials.first().map(|t| t.noise_norm),
        "budget": result.config.budget()?,
        "success": result.stats.success,
        "failures": failures,
    });
    fs::write(&paths.summary, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

/// Parses an `aggregate.csv` written by [`emit_outputs`].
pub fn read_aggregate_csv(path: impl AsRef<Path>) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != AGGREGATE_HEADER {
        return Err(Error::Parse(format!("unexpected aggregate header {header:?}")));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(AggregateRow {
            method: rec[0].parse()?,
            iter: rec[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad iteration {:?}: {e}", &rec[1])))?,
            metric: rec[2].to_string(),
            p5: num(&rec[3])?,
            p50: num(&rec[4])?,
            p95: num(&rec[5])?,
        });
    }
    Ok(rows)
}
