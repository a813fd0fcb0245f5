use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("precision loss: result indistinguishable from zero")]
    PrecisionLoss,
    #[error("division by exact zero")]
    DivisionByZero,
    #[error("operands live in different p-adic contexts")]
    ContextMismatch,
    #[error("value is not in the valuation ring")]
    NotIntegral,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("cover incomplete: point {0} lies in no cover member")]
    CoverIncomplete(String),
    #[error("region is not contained in the target region")]
    NotContained,
    #[error("point outside the domain: {0}")]
    OutOfDomain(String),
    #[error("membership failure: {0}")]
    MembershipFailure(String),
    #[error("domain is not a product region")]
    NotProductPartition,
    #[error("composition uncertified: {0}")]
    CompositionUncertified(String),
    #[error("certificate invalid for piece {0}")]
    CertificateInvalid(String),
    #[error("singular matrix")]
    Singular,
    #[error("element is not a unit")]
    NotAUnit,
    #[error("S(z) is singular")]
    SMatrixSingular,
    #[error("structure constants are not a unital associative algebra: {0}")]
    NotAnAlgebra(String),
    #[error("not certified: {0}")]
    NotCertified(String),
    #[error("fixed-point iteration exceeded its budget of {0} steps")]
    IterationBudgetExceeded(u32),
    #[error("index map is not a bijection")]
    NotBijective,
    #[error("malformed index: {0}")]
    MalformedIndex(String),
    #[error("zero condition violated at index {0}")]
    ZeroConditionViolated(String),
    #[error("refinement mismatch: {0}")]
    RefinementMismatch(String),
    #[error("parse error at {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("unknown suite {0}")]
    UnknownSuite(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

impl Error {
    pub fn parse(path: &str, msg: impl Into<String>) -> Error {
        Error::Parse { path: path.to_string(), msg: msg.into() }
    }
}
