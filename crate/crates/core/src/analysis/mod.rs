//! Outcome classification, summary statistics, regressions and rank tests.

pub mod interval;
pub mod models;
pub mod ols;
pub mod outcomes;
pub mod planted;
pub mod rank;
pub mod report;

pub use models::{fit_lpm, rank_test, rank_tests, Censoring, Comparison, Model, RegressionSpec, SessionMetric};
pub use ols::{Covariance, FitResult};
pub use outcomes::{classify, expert_claim_histogram, summary_rates, OutcomeClass, TypePair};
