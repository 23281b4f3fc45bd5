//! Least-squares core and the inference utilities built on it.

mod correlation;
mod linalg;
mod ols;
mod rank;
mod robust;

use thiserror::Error;

pub use correlation::{average_ranks, pearson_corr, spearman_corr};
pub use linalg::SquareMatrix;
pub use ols::{fit_ols, FittedModel};
pub use rank::rank_competition;
pub use robust::{cluster_robust_cov, wald_test, ClusterRobustCov, WaldTest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("design is rank deficient: column {label} is linearly dependent on earlier columns")]
    RankDeficient { label: String },
    #[error("need more rows than columns ({n_rows} rows, {n_cols} columns)")]
    TooFewRows { n_rows: usize, n_cols: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cluster-robust covariance needs at least two clusters")]
    SingleCluster,
    #[error("covariance submatrix is singular")]
    SingularSubmatrix,
    #[error("unknown coefficient label {0}")]
    UnknownLabel(String),
    #[error("zero variance")]
    ZeroVariance,
    #[error("need at least {0} values")]
    TooFewValues(usize),
    #[error("empty input")]
    EmptyInput,
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), NumericsError> {
    if expected == found {
        Ok(())
    } else {
        Err(NumericsError::LengthMismatch { expected, found })
    }
}
