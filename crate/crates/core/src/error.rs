use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid too coarse for what was requested.
    #[error("resolution: {0}")]
    Resolution(String),

    #[error("geometry: {0}")]
    Geometry(String),

    /// Evaluation point outside the analyticity sector of the end metric.
    #[error("domain: z = {z} is outside the sector |arg z| < {alpha}")]
    Domain { z: Complex64, alpha: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("degenerate deformed metric at x = {x}, y = {y}, lambda = {lambda}")]
    Degeneracy { x: f64, y: f64, lambda: Complex64 },

    #[error("index {index} out of range (available: {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("problem size {size} exceeds the dense cap {cap}")]
    SizeCap { size: usize, cap: usize },

    /// LU breakdown of `A - sigma M`; sigma sits on the pencil spectrum.
    #[error("shift {0} lies on the spectrum (factorization breakdown)")]
    ShiftOnSpectrum(Complex64),

    #[error("pencil is singular at mu = {0}")]
    SingularPencil(Complex64),

    #[error("no convergence: {converged} of {wanted} eigenpairs after {restarts} restarts")]
    NoConvergence {
        converged: usize,
        wanted: usize,
        restarts: usize,
        partial: Box<crate::eigen::EigenResult>,
    },

    #[error("no mutually valid points to compare")]
    EmptyValidity,

    #[error("dense eigensolver failed: {0}")]
    Dense(String),

    #[error("expression: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration/validation problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Domain { .. }
            | Error::Geometry(_)
            | Error::Resolution(_)
            | Error::Unsupported(_)
            | Error::IndexOutOfRange { .. }
            | Error::SizeCap { .. }
            | Error::Expression(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
