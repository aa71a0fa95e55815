use thiserror::Error;

use crate::ddi::{DdiResult, MveeSolution};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("density matrix is not normalized (trace = {trace})")]
    NotNormalized { trace: f64 },

    #[error("point is not a pure state (deviation {deviation:e})")]
    NotPureState { deviation: f64 },

    #[error("matrix does not stabilize the unit effect (residual {residual:e})")]
    InvalidRotation { residual: f64 },

    #[error("not a quasi-measurement (normalization residual {residual:e})")]
    NotAQuasiMeasurement { residual: f64 },

    #[error("vector is not a state (|u.s - 1| = {residual:e})")]
    InvalidState { residual: f64 },

    #[error("measurement has a degenerate probability range")]
    DegenerateRange,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("cloud is not a closed-form case: {0}")]
    NotClosedFormCase(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error(
        "ellipsoid solver did not converge after {} iterations (gap {:e})",
        .0.iterations,
        .0.gap
    )]
    MveeNoConvergence(Box<MveeSolution>),

    #[error(
        "inference did not converge after {} iterations (gap {:e})",
        .0.iterations,
        .0.optimality_gap
    )]
    DdiNoConvergence(Box<DdiResult>),
}
