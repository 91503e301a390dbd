//! Ties a validated experiment to the engine and the writers: run the sweep
//! point by point, report progress on standard error, write the result file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::config::ExperimentSpec;
use crate::engine::{self, EngineError, SweepPoint};
use crate::output::{self, OutputFormat, ResultRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write results to {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Everything a caller may want to inspect after a run.
#[derive(Debug)]
pub struct ExperimentSummary {
    pub points: Vec<SweepPoint>,
    pub rows: Vec<ResultRow>,
    pub path: PathBuf,
}

/// Execute the experiment and write its result file. Progress and per-point
/// timings go to standard error; timings enter the result rows only when
/// `measure_time` is set (they make re-runs differ byte-wise).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary, SimError> {
    spec.scenario.validate()?;
    let axis = spec.axis;
    let mut points = Vec::with_capacity(spec.values.len());
    let mut seconds = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let started = Instant::now();
        let point_cfg = engine::apply_axis(&spec.scenario, axis, value)?;
        let stats = engine::run_batch(&point_cfg)?;
        let elapsed = started.elapsed().as_secs_f64();
        eprintln!(
            "{} = {}: noma hm {:.4}±{:.4}{}{} [{:.2} s]",
            axis.name(),
            value,
            stats.noma.hm.probability,
            stats.noma.hm.half_width,
            match stats.noma.lm {
                Some(lm) => format!(", lm {:.4}±{:.4}", lm.probability, lm.half_width),
                None => String::new(),
            },
            if spec.output.baseline {
                format!("; oma hm {:.4}", stats.oma.hm.probability)
            } else {
                String::new()
            },
            elapsed,
        );
        points.push(SweepPoint { value, stats });
        seconds.push(if spec.output.measure_time { elapsed } else { 0.0 });
    }

    let rows = output::rows_from_sweep(axis.name(), &points, &seconds, spec.output.baseline);
    write_rows(&spec.output.path, spec.output.format, &rows)?;
    Ok(ExperimentSummary {
        points,
        rows,
        path: spec.output.path.clone(),
    })
}

fn write_rows(path: &PathBuf, format: OutputFormat, rows: &[ResultRow]) -> Result<(), SimError> {
    let wrap = |source: std::io::Error| SimError::Output {
        path: path.clone(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    let mut writer = BufWriter::new(file);
    match format {
        OutputFormat::Csv => output::write_csv(&mut writer, rows).map_err(wrap)?,
        OutputFormat::Json => output::write_json(&mut writer, rows).map_err(wrap)?,
    }
    writer.flush().map_err(wrap)
}
