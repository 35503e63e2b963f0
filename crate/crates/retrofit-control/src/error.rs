//! Error type shared by all modules.

use nalgebra::Complex;
use thiserror::Error;

/// Errors produced by system algebra, synthesis, and verification.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or channel dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A feedback interconnection has a (near-)singular instantaneous loop.
    #[error("ill-posed feedback loop: reciprocal condition number {rcond:.3e} below {limit:.3e}")]
    IllPosedLoop { rcond: f64, limit: f64 },

    /// Frequency-response evaluation requested at (or too close to) a pole.
    #[error("frequency evaluation at s = {0} hits a pole of the realization")]
    EvaluationAtPole(Complex<f64>),

    /// A mode with nonnegative real part cannot be moved by the available input.
    #[error("pair is not stabilizable: eigenvalue {0} fails the rank test")]
    Unstabilizable(Complex<f64>),

    /// A mode with nonnegative real part is invisible from the available output.
    #[error("pair is not detectable: eigenvalue {0} fails the rank test")]
    Undetectable(Complex<f64>),

    /// The plant violates the structural assumptions required for
    /// rectifier synthesis (relative-degree ordering, decoupling injectivity).
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),

    /// A numerical invariant that should hold by construction failed,
    /// indicating degenerate input data or accumulated roundoff.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// Zero-testing could not find enough sample points away from poles.
    #[error("sampling failure: {0}")]
    SamplingFailure(String),

    /// Time-domain simulation produced a non-finite state.
    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64 },

    /// Model or controller file violates its schema.
    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
