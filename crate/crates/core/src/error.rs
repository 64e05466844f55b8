use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("size mismatch: expected {expected} points, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("not a permutation: {0}")]
    NotBijective(String),

    #[error("not injective: {0}")]
    NotInjective(String),

    #[error("point {point} out of range for n = {n}")]
    PointOutOfRange { point: usize, n: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cardinality mismatch: {0}")]
    CardinalityMismatch(String),

    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),

    #[error("invalid matrix unit system: {0}")]
    InvalidMatrixUnits(String),

    #[error("generator index {index} out of range ({count} generators)")]
    GeneratorOutOfRange { index: usize, count: usize },

    #[error("generator count mismatch: {left} vs {right}")]
    GeneratorCountMismatch { left: usize, right: usize },

    #[error("invalid group spec: {0}")]
    InvalidGroup(String),

    #[error("incompatible size: {0}")]
    IncompatibleSize(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("malformed cylinder: {0}")]
    MalformedCylinder(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("radius mismatch: {0} vs {1}")]
    RadiusMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
