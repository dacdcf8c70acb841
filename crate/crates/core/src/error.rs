use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomials mix matching and tour variables")]
    KindMismatch,
    #[error("no value assigned to variable {0}")]
    UnboundVariable(String),
    #[error("size mismatch: expected {expected}, got {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid instance size {0}")]
    InvalidSize(usize),
    #[error("oracle enumeration for n={n} exceeds the configured bound {bound}")]
    OracleTooLarge { n: usize, bound: usize },
    #[error("symmetrization over S_{n} exceeds the configured bound {bound}")]
    SymmetrizationTooLarge { n: usize, bound: usize },
    #[error("derivation too large: {0}")]
    DerivationTooLarge(String),
    #[error("vertex {0} is already covered by the matching")]
    VertexCovered(usize),
    #[error("row {0} is already covered by the matching")]
    RowCovered(usize),
    #[error("level {level} out of range [{min}, {max}]")]
    InvalidLevel { level: usize, min: usize, max: usize },
    #[error("lifting vertices {0} and {1} are not fresh for the certificate")]
    VertexCollision(usize, usize),
    #[error("polynomial is not in the ideal; nonzero value {value} at solution {witness}")]
    NotAMember { witness: String, value: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
    #[error("dual certificate does not reproduce the objective: {0}")]
    DualInvalid(String),
    #[error("matrix is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("distances violate the triangle inequality: {0}")]
    NotMetric(String),
    #[error("identity is not a sum of squares modulo the ideal: {0}")]
    NotAnSos(String),
    #[error("moment basis has {size} elements, above the cap {cap}")]
    BasisTooLarge { size: usize, cap: usize },
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::InternalInvariant(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
