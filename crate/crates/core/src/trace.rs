//! Per-iteration diagnostics recorded by the decomposition methods.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Column names shared by every trace CSV, after any leading key columns.
pub const TRACE_COLUMNS: [&str; 9] = [
    "iter", "tan_A", "tan_B", "tan_C", "err_A", "err_B", "err_C", "residual", "wall_ms",
];

/// Metrics aggregated across trials; `wall_ms` is deliberately absent.
pub const METRICS: [&str; 7] = ["tan_A", "tan_B", "tan_C", "err_A", "err_B", "err_C", "residual"];

/// One trace row. Row 0 is the state right after initialization.
///
/// `tan` holds the tangents of the largest principal angle between each
/// iterate and the true leading factor subspace; `err` holds the largest
/// sign-aligned column error. Both need the ground truth and are `None`
/// without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub tan: Option<[f64; 3]>,
    pub err: Option<[f64; 3]>,
    pub residual: f64,
    pub wall_ms: f64,
}

impl TraceRow {
    /// Value of a named metric column, if present.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "tan_A" => self.tan.map(|t| t[0]),
            "tan_B" => self.tan.map(|t| t[1]),
            "tan_C" => self.tan.map(|t| t[2]),
            "err_A" => self.err.map(|e| e[0]),
            "err_B" => self.err.map(|e| e[1]),
            "err_C" => self.err.map(|e| e[2]),
            "residual" => Some(self.residual),
            "wall_ms" => Some(self.wall_ms),
            _ => None,
        }
    }

    /// Formatted cells in `TRACE_COLUMNS` order.
    pub fn cells(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(TRACE_COLUMNS.len());
        out.push(self.iter.to_string());
        for name in &TRACE_COLUMNS[1..] {
            out.push(format_cell(self.metric(name)));
        }
        out
    }
}

/// Formats a number with 17 significant digits; `None` becomes an empty cell.
pub fn format_cell(value: Option<f64>) -> String {
    match value {
        None => String::new(),
        Some(v) if v.is_nan() => "NaN".into(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) => format!("{v:.16e}"),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().is_none_or(|last| last.iter < row.iter));
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Largest final column error over the three modes, if known.
    pub fn final_error(&self) -> Option<f64> {
        self.last()
            .and_then(|r| r.err)
            .map(|e| e.iter().copied().fold(0.0, f64::max))
    }

    /// Writes a standalone CSV with `TRACE_COLUMNS` as header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACE_COLUMNS)?;
        for row in &self.rows {
            w.write_record(row.cells())?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_empty_cells() {
        let mut t = IterationTrace::new();
        t.push(TraceRow {
            iter: 0,
            tan: None,
            err: None,
            residual: 0.5,
            wall_ms: 1.0,
        });
        t.push(TraceRow {
            iter: 1,
            tan: Some([0.1, 0.2, 0.3]),
            err: Some([1e-3, 2e-3, 3e-3]),
            residual: 0.25,
            wall_ms: 2.0,
        });
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,tan_A,tan_B,tan_C,err_A,err_B,err_C,residual,wall_ms");
        assert!(lines[1].starts_with("0,,,,,,,5.0000000000000000e-1,"));
        assert_eq!(t.final_error(), Some(3e-3));
    }

    #[test]
    fn cells_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, -2.5e17] {
            let s = format_cell(Some(v));
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(format_cell(Some(f64::INFINITY)).parse::<f64>().unwrap(), f64::INFINITY);
    }
}
