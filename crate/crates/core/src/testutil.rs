//! Shared fixtures for unit tests.

use nalgebra::DMatrix;

use crate::moments::{summarize, MomentMatrix, RegressionSummary};

/// Observed covariance of (Y, X, W1) for the scalar-W1 demonstration model:
/// Var(X)=1, Var(W1)=1, Cov(X,W1)=0.5, Var(Y)=4.75, Cov(Y,X)=1.75,
/// Cov(Y,W1)=1.5.
pub fn demo1_moments() -> MomentMatrix {
    let cov = DMatrix::from_row_slice(3, 3, &[4.75, 1.75, 1.5, 1.75, 1.0, 0.5, 1.5, 0.5, 1.0]);
    MomentMatrix::from_cov(cov).unwrap()
}

pub fn demo1_summary() -> RegressionSummary {
    summarize(&demo1_moments()).unwrap()
}

pub const DEMO1_R2: f64 = 15.0 / 19.0;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
