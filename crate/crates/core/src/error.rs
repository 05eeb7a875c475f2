use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building or validating a configuration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("parameter `{key}` = {value}: {constraint}")]
    OutOfRange {
        key: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("parameter `{key}` is not optional and cannot be `none`")]
    NotOptional { key: &'static str },
    #[error("{0}")]
    Inconsistent(String),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("sweep cell {cell}: {source}")]
    Cell {
        cell: usize,
        #[source]
        source: Box<ConfigError>,
    },
}

/// Errors raised while running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("job stalled at t={time} min with no repairs in flight; it can never complete")]
    Deadlock { time: f64 },
    #[error("invariant violated at t={time} min: {message}")]
    Invariant { time: f64, message: String },
}

/// Errors raised while writing results.
#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
}
