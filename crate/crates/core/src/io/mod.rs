//! File formats: cohort CSVs, the flat `key = value` generator config,
//! and the report files written by a run.

mod config;
mod records;
mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::cohort::CohortError;

pub use config::{config_to_string, parse_config, read_config, write_config};
pub use records::{
    load_cohort, read_pupils, read_schools, write_cohort, write_pupils, write_schools, PUPIL_HEADER, SCHOOL_HEADER,
};
pub use report::{
    analyze, format_fixed, gap_rows, read_score_file, write_comparison, write_gap_file, write_reports,
    write_score_file, Comparison, GapPair, SchoolRow, RunOptions, RunReport, ScoreRow, SCHOOLS_HEADER, SCORE_HEADER,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("{}: header mismatch: {detail}", path.display())]
    SchemaMismatch { path: PathBuf, detail: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount { row: usize, expected: usize, found: usize },
    #[error("row {row}: column {column}: unknown token {value:?}")]
    BadToken {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("row {row}: column {column}: not a number: {value:?}")]
    BadNumber {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error(transparent)]
    Validation(#[from] CohortError),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, err: csv::Error) -> Self {
        let path = path.into();
        match err.into_kind() {
            csv::ErrorKind::Io(source) => IoError::Io { path, source },
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => IoError::FieldCount {
                // header is line 1
                row: pos.map_or(0, |p| p.line() as usize - 1),
                expected: expected_len as usize,
                found: len as usize,
            },
            other => IoError::Csv {
                path,
                message: format!("{other:?}"),
            },
        }
    }
}
