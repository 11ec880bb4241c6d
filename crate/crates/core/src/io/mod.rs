//! File formats: scenario CSV in, flat config in, canonical JSON reports out.

pub mod config;
pub mod report;
pub mod scenario;

use thiserror::Error;

pub use config::{PartitionRule, RunConfig, StatisticSpec, KNOWN_KEYS};
pub use report::{canonical_json, emit_report, ReportDocument};
pub use scenario::{load_scenario_csv, read_scenarios, write_scenarios};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{input}: file contains no observations")]
    EmptyFile { input: String },
    #[error("line {line}: expected header `scenario,value`, found `{found}`")]
    MissingHeader { line: u64, found: String },
    #[error("line {line}: value {value:?} is not a number")]
    NonNumeric { line: u64, value: String },
    #[error("line {line}: value {value:?} is not finite")]
    NonFinite { line: u64, value: String },
    #[error("line {line}: empty scenario id")]
    EmptyScenarioId { line: u64 },
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },
    #[error("config key {key}: {message}")]
    Config { key: String, message: String },
}

impl IoError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::EmptyFile { .. } => "empty_file",
            Self::MissingHeader { .. } => "missing_header",
            Self::NonNumeric { .. } => "non_numeric",
            Self::NonFinite { .. } => "non_finite",
            Self::EmptyScenarioId { .. } => "empty_scenario_id",
            Self::MalformedRow { .. } => "malformed_row",
            Self::Data(_) => "invalid_data",
            Self::ConfigSyntax { .. } => "config_syntax",
            Self::Config { .. } => "config_value",
        }
    }
}
