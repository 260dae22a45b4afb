use thiserror::Error;

/// Errors produced by the solver, the operator algebra and the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain too short for the doubled observation window: need length >= 2.2 * horizon, got length {length}, horizon {horizon}")]
    DomainTooShort { length: f64, horizon: f64 },

    #[error("numerical instability at time step {step}: non-finite field value")]
    Instability { step: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not positive: largest eigenvalue {lambda_max} <= 0")]
    NotPositive { lambda_max: f64 },

    #[error("operator is not symmetric: relative defect {defect:.3e} exceeds {limit:.3e}")]
    NotSymmetric { defect: f64, limit: f64 },

    #[error("inconsistent inverse data: symmetry defect {defect:.3e} of the connecting operator exceeds 0.1")]
    DataInconsistency { defect: f64 },

    #[error("insufficient illumination: denominator stays below the ridge everywhere; enlarge the control family")]
    InsufficientIllumination,

    #[error("malformed matrix file: {0}")]
    CsvFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
