//! Monte-Carlo sweeps over mutation rate, error rate and coverage.

pub mod config;
pub mod run;
pub mod stats;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

pub use config::{ExperimentConfig, Mode, OutputPaths, SourceSpec};
pub use run::{derive_seed, run_experiment, TrialRecord};
pub use stats::{quantile, summarize, BoxStats, GridKey};

use crate::error::Result;
use crate::io::formats::create;

pub const SUMMARY_FORMAT: &str = "mutrate-summary/1";

/// One row per record, with a header row.
pub fn write_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    reader.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[derive(Serialize)]
struct Summary<'a> {
    format: &'static str,
    config: &'a ExperimentConfig,
    boxes: &'a [BoxStats],
}

pub fn write_summary<W: Write>(mut w: W, config: &ExperimentConfig, boxes: &[BoxStats]) -> Result<()> {
    serde_json::to_writer_pretty(
        &mut w,
        &Summary {
            format: SUMMARY_FORMAT,
            config,
            boxes,
        },
    )?;
    writeln!(w)?;
    Ok(())
}

/// Runs the sweep and writes whichever outputs the config names.
pub fn run_and_write(config: &ExperimentConfig) -> Result<(Vec<TrialRecord>, Vec<BoxStats>)> {
    let records = run_experiment(config)?;
    let boxes = summarize(&records);
    if let Some(path) = &config.output.csv {
        write_to(path, |w| write_csv(w, &records))?;
    }
    if let Some(path) = &config.output.summary {
        write_to(path, |w| write_summary(w, config, &boxes))?;
    }
    Ok((records, boxes))
}

fn write_to(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
