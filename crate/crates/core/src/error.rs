use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subdifferential is not a singleton at {point:?}")]
    Kink { point: Vec<f64> },
    #[error("function value is not finite at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("section height must be positive, got {0}")]
    InvalidHeight(f64),
    #[error("engulfing constant must exceed 1, got {0}")]
    InvalidConstant(f64),
    #[error("line restriction needs two distinct points")]
    DegenerateLine,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported construct at offset {offset}: {message}")]
    Unsupported { offset: usize, message: String },
    #[error("variable x{index} out of range for dimension {dimension}")]
    VariableOutOfRange { index: usize, dimension: usize },
    #[error("not convex: midpoint of {x:?} and {y:?} lies above the chord")]
    NotConvex { x: Vec<f64>, y: Vec<f64> },
    #[error("unknown builtin function '{0}'")]
    UnknownBuiltin(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("report has no rows to plot")]
    EmptyTable,
}
