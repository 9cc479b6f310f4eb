//! Batch experiment runner for `ergolab`.

pub mod config;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use ergolab::Limits;
use thiserror::Error;

use config::{ExperimentConfig, Kind};
use report::{Report, Timestamp, TOOLKIT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_SIZE_CAP: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config does not match the schema: {0}")]
    Schema(#[source] serde_json::Error),

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error("config kind is {found:?} but the command asked for {expected:?}")]
    KindMismatch { expected: &'static str, found: &'static str },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown series {name:?}; available: {available}")]
    UnknownSeries { name: String, available: String },

    #[error("could not serialize report: {0}")]
    Serialize(#[source] serde_json::Error),

    #[error(transparent)]
    Core(#[from] ergolab::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use ergolab::Error as E;
        match self {
            CliError::Core(E::SizeCap { .. }) => EXIT_SIZE_CAP,
            CliError::Core(
                E::Numerical { .. } | E::NotPositiveDefinite { .. } | E::TrivialFactor(_),
            )
            | CliError::Serialize(_) => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        }
    }
}

/// Parses `path`, checks it against `kind` and applies a seed override.
pub fn load_config(path: &Path, kind: Kind, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if cfg.kind() != kind {
        return Err(CliError::KindMismatch {
            expected: kind.name(),
            found: cfg.kind().name(),
        });
    }
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

pub fn run(cfg: &ExperimentConfig, limits: &Limits) -> Result<Report, CliError> {
    let start = Instant::now();
    let outcome = run::execute(cfg, limits)?;
    Ok(Report {
        toolkit: TOOLKIT.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind(),
        seed: cfg.seed(),
        size_cap: limits.size_cap,
        config: cfg.clone(),
        verdicts: outcome.verdicts,
        evidence: outcome.evidence,
        series: outcome.series,
        timestamp: Timestamp::now(start.elapsed().as_secs_f64()),
    })
}
