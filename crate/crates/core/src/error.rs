use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid register: {0}")]
    InvalidRegister(String),

    #[error("invalid pulse sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state is not physical: {0}")]
    UnphysicalState(String),

    #[error("integrator failed to reach tolerance: {0}")]
    IntegratorFailure(String),

    #[error("trajectory norm underflow at t = {0}")]
    NormUnderflow(f64),

    #[error("jump-time bisection failed: {0}")]
    BisectionFailure(String),

    #[error("not enough records for the fit: {0}")]
    InsufficientData(String),

    #[error("fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("model does not cover this configuration: {0}")]
    OutOfModel(String),

    #[error("basis is not orthonormal (max defect {0:.3e})")]
    NonOrthonormalBasis(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
