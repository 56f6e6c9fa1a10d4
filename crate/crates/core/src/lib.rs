//! Sparse linear and logistic regression with a correlation-weighted lasso
//! penalty
//!
//! ```text
//! λ ( ‖β‖₁ + (α/2) |β|ᵀ R |β| )
//! ```
//!
//! where `R` is a nonnegative similarity matrix built from absolute column
//! correlations. Large `R_jk` discourages selecting columns `j` and `k`
//! together, so selected features tend to be mutually uncorrelated.
//! `α = 0` is the plain lasso; a group-indicator `R` gives the exclusive
//! group lasso.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod modelsel;
pub mod report;
pub mod similarity;
pub mod solver;
pub mod theory;

pub use data::{generate_synthetic, load_csv, unstandardize_coefficients, Dataset, GroundTruth, SyntheticSpec, Task};
pub use error::{Error, Result};
pub use modelsel::{cross_validate, evaluate, select_validation, Metrics, SelectionResult, SimilaritySpec};
pub use similarity::{
    build_similarity, penalty_value, GroupPartition, PenaltySpec, SimilarityMatrix, SimilarityVariant,
};
pub use solver::{
    check_kkt, fit, fit_logistic, fit_path, soft_threshold, FitResult, InitStrategy, LogisticFitResult, PathResult,
    SolverConfig,
};
pub use theory::{sign_recovery_check, SignRecoveryReport};
