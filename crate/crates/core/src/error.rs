use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("monomial map evaluated at a point with a zero coordinate")]
    ZeroCoordinate,
    #[error("surface mismatch: {0}")]
    SurfaceMismatch(String),
    #[error("point violates the Markov surface equation (residual {residual:e})")]
    OffSurface { residual: f64 },
    #[error("matrix {0:?} is not in GL2(Z)")]
    NonUnimodular([[i64; 2]; 2]),
    #[error("map is not loxodromic (lambda1 = {0})")]
    NotLoxodromic(f64),
    #[error("power iteration did not converge in {0} steps")]
    DegenerateEigenspace(usize),
    #[error("basis decomposition failed (residual {0:e})")]
    BasisFailure(f64),
    #[error("no built-in completion for this map; supply a completion spec")]
    RequiresCustomModel,
    #[error("invalid completion model: {0}")]
    InvalidModel(String),
    #[error("bad point: {0}")]
    BadPoint(String),
    #[error("unsupported field: {0}")]
    UnsupportedField(String),
    #[error("specialization at an excluded parameter: {0}")]
    BadFiber(String),
    #[error("empty input")]
    EmptyInput,
    #[error("grid mismatch")]
    GridMismatch,
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("cannot factor {0} below the prime cap")]
    Unfactorable(String),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
