use thiserror::Error;

/// Errors produced by grid construction, set algebra, solvers and the
/// scenario/CLI layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid bounds in dimension {dim}: lo = {lo}, hi = {hi}")]
    InvalidBounds { dim: usize, lo: f64, hi: f64 },

    #[error("dimension {dim} has {count} points, at least 3 are required")]
    TooFewPoints { dim: usize, count: usize },

    #[error("value fields live on different grids")]
    GridMismatch,

    #[error("time {t} is outside the stored range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("state component {dim} = {value} lies outside [{lo}, {hi}]")]
    StateOutOfBounds { dim: usize, value: f64, lo: f64, hi: f64 },

    #[error("steering angle {0} makes tan(delta) singular")]
    SingularSteering(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid solver request: {0}")]
    InvalidRequest(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unsupported formula: {0}")]
    UnsupportedFragment(String),

    #[error("atom `{0}` has no bound set")]
    UnboundAtom(String),

    #[error("state is not in the safe set (value {value})")]
    UnsafeStart { value: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("tube file error: {0}")]
    TubeFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
