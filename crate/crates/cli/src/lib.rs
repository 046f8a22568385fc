//! Seeded, replayable experiment runs.
//!
//! A run is described by one JSON config document
//! `{"experiment": name, "seed": n, "params": {...}}`. Missing parameters take
//! their defaults, and the record written for the run echoes the completed
//! config, so replaying a record re-runs exactly the same experiment.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

mod experiments;

pub use experiments::Experiment;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("replayed result differs from the record: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Engine(#[from] cmqm::Error),
}

/// Exit status and machine-readable name of every error.
///
/// | code | error |
/// |------|-------|
/// | 2 | `config_invalid` |
/// | 3 | `replay_mismatch` |
/// | 4 | `io` |
/// | 10..=25 | engine errors, see [`engine_error_code`] |
impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::ReplayMismatch(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Engine(e) => engine_error_code(e).0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "config_invalid",
            CliError::ReplayMismatch(_) => "replay_mismatch",
            CliError::Io { .. } => "io",
            CliError::Engine(e) => engine_error_code(e).1,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.to_string(),
        })
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

pub fn engine_error_code(e: &cmqm::Error) -> (i32, &'static str) {
    use cmqm::Error::*;
    match e {
        InvalidResolution(_) => (10, "invalid_resolution"),
        RangeExceeded => (11, "range_exceeded"),
        ResolutionExceeded { .. } => (12, "resolution_exceeded"),
        DimensionMismatch { .. } => (13, "dimension_mismatch"),
        TotalExtinction => (14, "total_extinction"),
        NotUnitary(_) => (15, "not_unitary"),
        InvalidPermutation(_) => (16, "invalid_permutation"),
        NotRepresentable(_) => (17, "not_representable"),
        TagOverflow { .. } => (18, "tag_overflow"),
        InvalidPolynomial(_) => (19, "invalid_polynomial"),
        OutsideDomain => (20, "outside_domain"),
        InvalidProgramIndex(_) => (21, "invalid_program_index"),
        InvalidProgram(_) => (22, "invalid_program"),
        TapeBoundExceeded(_) => (23, "tape_bound_exceeded"),
        InvalidArgument(_) => (24, "invalid_argument"),
        MalformedDump(_) => (25, "malformed_dump"),
    }
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "empty_object")]
    pub params: Value,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            params: empty_object(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    /// Reads a config file for `experiment`. The file may omit the
    /// `"experiment"` field; if present it must agree.
    pub fn load(path: &Path, experiment: Experiment) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut doc: Value = serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| CliError::ConfigInvalid("config must be a JSON object".into()))?;
        let name = serde_json::to_value(experiment).expect("experiment names serialize");
        match obj.get("experiment") {
            None => {
                obj.insert("experiment".into(), name);
            }
            Some(v) if *v == name => {}
            Some(v) => {
                return Err(CliError::ConfigInvalid(format!(
                    "config is for experiment {v}, not {name}"
                )))
            }
        }
        serde_json::from_value(doc).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub config: ExperimentConfig,
    pub engine_version: String,
    pub wall_clock_ms: u64,
    pub result: Value,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: Record,
    /// Series data written next to the record as `.csv`.
    pub csv: Option<String>,
    /// Event stream written next to the record as `.events.jsonl`.
    pub jsonl: Option<String>,
}

impl RunOutput {
    /// The result payload in its canonical serialized form.
    pub fn payload(&self) -> String {
        serde_json::to_string(&self.record.result).expect("values serialize")
    }
}

/// Validates the config, fills in defaults and runs the experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let prepared = experiments::prepare(config)?;
    let resolved = ExperimentConfig {
        experiment: config.experiment,
        seed: config.seed,
        params: prepared.params_echo()?,
    };
    let start = Instant::now();
    let out = prepared.execute(config.seed)?;
    let wall_clock_ms = start.elapsed().as_millis() as u64;
    Ok(RunOutput {
        record: Record {
            config: resolved,
            engine_version: ENGINE_VERSION.to_string(),
            wall_clock_ms,
            result: out.result,
        },
        csv: out.csv,
        jsonl: out.jsonl,
    })
}

/// Paths for the record and its sibling files.
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        out.to_path_buf(),
        out.with_extension("csv"),
        out.with_extension("events.jsonl"),
    )
}

/// Writes the record (and any series) to `out`, or the record to stdout.
pub fn write_output(output: &RunOutput, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&output.record).expect("records serialize") + "\n";
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let (rec, csv, jsonl) = output_paths(path);
            std::fs::write(&rec, text).map_err(|e| CliError::io(&rec, e))?;
            if let Some(c) = &output.csv {
                std::fs::write(&csv, c).map_err(|e| CliError::io(&csv, e))?;
            }
            if let Some(j) = &output.jsonl {
                std::fs::write(&jsonl, j).map_err(|e| CliError::io(&jsonl, e))?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub experiment: Experiment,
    pub identical: bool,
    pub original_wall_clock_ms: u64,
    pub replay_wall_clock_ms: u64,
}

/// Re-runs the config echoed in `record_text` and compares payloads byte
/// for byte.
pub fn replay(record_text: &str) -> Result<(ReplayReport, RunOutput), CliError> {
    let record: Record =
        serde_json::from_str(record_text).map_err(|e| CliError::ConfigInvalid(format!("not a record: {e}")))?;
    let rerun = run(&record.config)?;
    let before = serde_json::to_string(&record.result).expect("values serialize");
    let after = rerun.payload();
    if before != after {
        return Err(CliError::ReplayMismatch(format!(
            "{} result changed ({} vs {} bytes)",
            serde_json::to_string(&record.config.experiment).expect("serializes"),
            before.len(),
            after.len()
        )));
    }
    Ok((
        ReplayReport {
            experiment: record.config.experiment,
            identical: true,
            original_wall_clock_ms: record.wall_clock_ms,
            replay_wall_clock_ms: rerun.record.wall_clock_ms,
        },
        rerun,
    ))
}
