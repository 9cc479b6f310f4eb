//! Reports, atomic output and plot-data emission.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentConfig, Kind};
use crate::CliError;

pub const TOOLKIT: &str = "ergolab";

/// An `(x, y)` series for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub x: String,
    pub y: String,
    pub points: Vec<[f64; 2]>,
}

impl Series {
    pub fn new(x: &str, y: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Series {
            x: x.to_string(),
            y: y.to_string(),
            points: points.into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }
}

/// Wall-clock data. The only part of a report that varies between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamp {
    pub unix_seconds: u64,
    pub runtime_seconds: f64,
}

impl Timestamp {
    pub fn now(runtime_seconds: f64) -> Self {
        let unix_seconds = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Timestamp {
            unix_seconds,
            runtime_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub toolkit: String,
    pub version: String,
    pub kind: Kind,
    pub seed: u64,
    pub size_cap: usize,
    pub config: ExperimentConfig,
    pub verdicts: BTreeMap<String, String>,
    pub evidence: Value,
    pub series: BTreeMap<String, Series>,
    pub timestamp: Timestamp,
}

impl Report {
    /// Pretty JSON with `timestamp` last, so runs differ only in the tail.
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(CliError::Serialize)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(CliError::Schema)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Report::from_json(&text)
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Two-column CSV of a named series, in stored order.
pub fn emit_plot_data<W: Write>(report: &Report, series: &str, mut w: W) -> Result<(), CliError> {
    let s = report.series.get(series).ok_or_else(|| CliError::UnknownSeries {
        name: series.to_string(),
        available: report.series.keys().cloned().collect::<Vec<_>>().join(", "),
    })?;
    let io = |e| CliError::io(Path::new("<plot output>"), e);
    writeln!(w, "{},{}", s.x, s.y).map_err(io)?;
    for [x, y] in &s.points {
        writeln!(w, "{x:?},{y:?}").map_err(io)?;
    }
    Ok(())
}
