use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid level {0} outside the supported range 1..=14")]
    InvalidLevel(u32),

    #[error("unsupported order {0}")]
    InvalidOrder(usize),

    #[error("incompatible grid sizes: {0}")]
    SizeMismatch(String),

    #[error("kernel is singular at t = ({0}, {1})")]
    Singular(f64, f64),

    #[error("adaptive quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("continuity system of order {0} is singular")]
    SingularSystem(usize),

    #[error("invalid softening parameters: {0}")]
    InvalidParams(String),

    #[error("schedule does not match the evaluation: {0}")]
    Schedule(String),

    #[error("reference solution failed its consistency check: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
