use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports. [`Error::code`] gives the stable
/// identifier used by the command-line front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("special-model profile requires rho = 1, lambda = 0 and q = 0 (got rho={rho}, lambda={lambda}, q={q})")]
    SpecialModelParamMismatch { rho: f64, lambda: f64, q: f64 },
    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("boundary face has no sample points")]
    EmptyFace,
    #[error("sample with non-positive variance v = {0}")]
    NonPositiveVariance(f64),
    #[error("operator is in the wrong frame: {0}")]
    WrongFrame(String),
    #[error("point outside the spatial domain: {0}")]
    DomainError(String),
    #[error("epoch outside the admissible time range: {0}")]
    EpochError(String),
    #[error("alpha = 1 makes the power-law to Feller map singular")]
    AlphaOne,
    #[error("no coordinate map from {from} to {to}")]
    UnsupportedPair { from: String, to: String },
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: String, found: String },
    #[error("coordinate map is not monotone on the sampled range")]
    NonMonotoneMap,
    #[error("bad grid specification: {0}")]
    BadSpec(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value at time step {step}")]
    UnstableStep { step: usize },
    #[error("need at least 3 time slices, got {0}")]
    TooFewSlices(usize),
    #[error("no exact-solution oracle for this equation and data")]
    NoOracle,
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("time slices are required: {0}")]
    MissingTimeSlices(String),
    #[error("characteristic-function integrand tail {tail:e} above tolerance at cutoff {cutoff}")]
    QuadratureTailTooFat { tail: f64, cutoff: f64 },
    #[error("samples do not span enough: {0}")]
    InsufficientSpan(String),
    #[error("non-positive sample: {0}")]
    NonPositiveSample(String),
    #[error("Taecklind function not positive at s = {0}")]
    NonPositiveH(f64),
    #[error("Feller condition violated: {lhs} < {rhs}")]
    FellerViolated { lhs: f64, rhs: f64 },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "InvalidParams",
            Error::SpecialModelParamMismatch { .. } => "SpecialModelParamMismatch",
            Error::NonUnitDirection(_) => "NonUnitDirection",
            Error::EmptyFace => "EmptyFace",
            Error::NonPositiveVariance(_) => "NonPositiveVariance",
            Error::WrongFrame(_) => "WrongFrame",
            Error::DomainError(_) => "DomainError",
            Error::EpochError(_) => "EpochError",
            Error::AlphaOne => "AlphaOne",
            Error::UnsupportedPair { .. } => "UnsupportedPair",
            Error::FrameMismatch { .. } => "FrameMismatch",
            Error::NonMonotoneMap => "NonMonotoneMap",
            Error::BadSpec(_) => "BadSpec",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::UnstableStep { .. } => "UnstableStep",
            Error::TooFewSlices(_) => "TooFewSlices",
            Error::NoOracle => "NoOracle",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::MissingTimeSlices(_) => "MissingTimeSlices",
            Error::QuadratureTailTooFat { .. } => "QuadratureTailTooFat",
            Error::InsufficientSpan(_) => "InsufficientSpan",
            Error::NonPositiveSample(_) => "NonPositiveSample",
            Error::NonPositiveH(_) => "NonPositiveH",
            Error::FellerViolated { .. } => "FellerViolated",
        }
    }
}
