//! Line-oriented run records.
//!
//! A result file holds one JSON object per line: the config echo, one row
//! per trial in trial order, then the summary. Floats are written in their
//! shortest round-trip form, so parsing a file and writing it back yields
//! the same bytes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::CltPrediction;
use crate::harness::{ExperimentConfig, ExperimentOutcome, Histogram, TrialSummary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RecordLine {
    Config {
        schema_version: u32,
        /// Seconds since the Unix epoch.
        timestamp: u64,
        config: ExperimentConfig,
    },
    Trial {
        trial: u64,
        value: f64,
    },
    Summary {
        prediction: CltPrediction,
        summary: TrialSummary,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub schema_version: u32,
    pub timestamp: u64,
    pub config: ExperimentConfig,
    pub values: Vec<f64>,
    pub prediction: CltPrediction,
    pub summary: TrialSummary,
}

fn io_err(e: std::io::Error) -> Error {
    Error::invalid(format!("i/o error: {e}"))
}

impl RunRecord {
    pub fn new(config: ExperimentConfig, outcome: ExperimentOutcome, timestamp: u64) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            timestamp,
            config,
            values: outcome.values,
            prediction: outcome.prediction,
            summary: outcome.summary,
        }
    }

    pub fn lines(&self) -> Vec<RecordLine> {
        let mut out = Vec::with_capacity(self.values.len() + 2);
        out.push(RecordLine::Config {
            schema_version: self.schema_version,
            timestamp: self.timestamp,
            config: self.config.clone(),
        });
        out.extend(self.values.iter().enumerate().map(|(t, &value)| RecordLine::Trial {
            trial: t as u64,
            value,
        }));
        out.push(RecordLine::Summary {
            prediction: self.prediction.clone(),
            summary: self.summary.clone(),
        });
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for line in self.lines() {
            serde_json::to_writer(&mut w, &line).map_err(|e| Error::invalid(e.to_string()))?;
            w.write_all(b"\n").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn to_text(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut values = Vec::new();
        let mut tail = None;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(io_err)?;
            let parsed: RecordLine = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("line {}: {e}", i + 1)))?;
            match parsed {
                RecordLine::Config {
                    schema_version,
                    timestamp,
                    config,
                } if i == 0 => header = Some((schema_version, timestamp, config)),
                RecordLine::Trial { trial, value } if header.is_some() && tail.is_none() => {
                    if trial != values.len() as u64 {
                        return Err(Error::invalid(format!(
                            "line {}: trial {trial} out of order",
                            i + 1
                        )));
                    }
                    values.push(value);
                }
                RecordLine::Summary { prediction, summary } if header.is_some() && tail.is_none() => {
                    tail = Some((prediction, summary))
                }
                _ => return Err(Error::invalid(format!("line {}: unexpected record", i + 1))),
            }
        }
        let (schema_version, timestamp, config) =
            header.ok_or_else(|| Error::invalid("missing config record"))?;
        if schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported schema_version {schema_version}"
            )));
        }
        let (prediction, summary) = tail.ok_or_else(|| Error::invalid("missing summary record"))?;
        Ok(RunRecord {
            schema_version,
            timestamp,
            config,
            values,
            prediction,
            summary,
        })
    }
}

/// Histogram as CSV with columns `lower,upper,count`.
pub fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("lower,upper,count\n");
    for (i, count) in h.counts.iter().enumerate() {
        s.push_str(&format!("{:?},{:?},{}\n", h.edges[i], h.edges[i + 1], count));
    }
    s
}
