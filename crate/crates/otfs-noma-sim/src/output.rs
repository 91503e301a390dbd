//! Result rows and the CSV/JSON writers.
//!
//! The CSV header is fixed: `axis,value,scheme,role,outage,ci_halfwidth,trials,seconds`.
//! Numbers are printed locale-independently with 9 significant digits; the
//! JSON output carries the same rows as an array of objects with the values
//! rounded to the same precision.

use std::io::{self, Write};

use serde::Serialize;

use crate::engine::{OutageStats, SweepPoint};

pub const CSV_HEADER: &str = "axis,value,scheme,role,outage,ci_halfwidth,trials,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// One output record: scheme × role at one sweep value.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResultRow {
    pub axis: String,
    pub value: f64,
    pub scheme: String,
    pub role: String,
    pub outage: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
    pub seconds: f64,
}

/// Flatten sweep points into rows: per value, NOMA first (then the baseline
/// when requested), high-mobility row before the low-mobility row.
pub fn rows_from_sweep(
    axis: &str,
    points: &[SweepPoint],
    seconds: &[f64],
    baseline: bool,
) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for (point, &secs) in points.iter().zip(seconds) {
        push_scheme_rows(&mut rows, axis, point.value, "noma", &point.stats.noma, secs);
        if baseline {
            push_scheme_rows(&mut rows, axis, point.value, "oma", &point.stats.oma, secs);
        }
    }
    rows
}

fn push_scheme_rows(
    rows: &mut Vec<ResultRow>,
    axis: &str,
    value: f64,
    scheme: &str,
    stats: &OutageStats,
    seconds: f64,
) {
    rows.push(ResultRow {
        axis: axis.to_string(),
        value,
        scheme: scheme.to_string(),
        role: "hm".to_string(),
        outage: stats.hm.probability,
        ci_halfwidth: stats.hm.half_width,
        trials: stats.trials,
        seconds,
    });
    if let Some(lm) = stats.lm {
        rows.push(ResultRow {
            axis: axis.to_string(),
            value,
            scheme: scheme.to_string(),
            role: "lm".to_string(),
            outage: lm.probability,
            ci_halfwidth: lm.half_width,
            trials: stats.trials,
            seconds,
        });
    }
}

/// Format with 9 significant digits, positional where reasonable and
/// exponential otherwise, trailing zeros trimmed (the `%.9g` convention).
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exponent) {
        let decimals = (8 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_trailing_zeros(&s)
    } else {
        let s = format!("{x:.8e}");
        // mantissa zeros before the exponent marker
        match s.split_once('e') {
            Some((mantissa, exp)) => format!("{}e{}", trim_trailing_zeros(mantissa), exp),
            None => s,
        }
    }
}

fn trim_trailing_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Round to 9 significant digits (for the JSON numbers).
pub fn round_sig9(x: f64) -> f64 {
    format_sig9(x).parse().unwrap_or(x)
}

pub fn write_csv<W: Write>(mut writer: W, rows: &[ResultRow]) -> io::Result<()> {
    writeln!(writer, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            row.axis,
            format_sig9(row.value),
            row.scheme,
            row.role,
            format_sig9(row.outage),
            format_sig9(row.ci_halfwidth),
            row.trials,
            format_sig9(row.seconds),
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(mut writer: W, rows: &[ResultRow]) -> io::Result<()> {
    let rounded: Vec<ResultRow> = rows
        .iter()
        .map(|row| ResultRow {
            value: round_sig9(row.value),
            outage: round_sig9(row.outage),
            ci_halfwidth: round_sig9(row.ci_halfwidth),
            seconds: round_sig9(row.seconds),
            ..row.clone()
        })
        .collect();
    serde_json::to_writer_pretty(&mut writer, &rounded)?;
    writeln!(writer)?;
    Ok(())
}
