use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    /// Model probability is zero on a cell that has observations.
    #[error("degenerate gradient: model probability is zero on nonempty cell {cell}")]
    DegenerateGradient { cell: usize },

    #[error("parameter {index} = {value} lies on the boundary of its box")]
    BoundaryParameter { index: usize, value: f64 },

    #[error("singular Fisher information (condition number {condition:e})")]
    SingularInformation { condition: f64 },

    #[error("degenerate variance estimate {variance:e}")]
    DegenerateVariance { variance: f64 },

    #[error("no equidistant mixing weight in [0, 1]")]
    NoEquidistance,
}
