use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every rejection the library can produce.
///
/// [`Error::code`] gives a stable short identifier used in machine-readable
/// reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid complex: {0}")]
    InvalidComplex(String),

    #[error("non-positive cotangent weight {weight:e} on edge {edge:?} (triangle {triangle:?})")]
    NonPositiveCotangent {
        edge: (usize, usize),
        triangle: [usize; 3],
        weight: f64,
    },

    #[error("non-dirichlet subgraph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("no non-dirichlet vertices left")]
    EmptyInterior,

    #[error("invalid exhaustion: {0}")]
    InvalidExhaustion(String),

    #[error("requested {k} eigenpairs but dimension is {dim}")]
    KTooLarge { k: usize, dim: usize },

    #[error("eigensolver did not converge after {iterations} iterations (best residuals {residuals:?})")]
    NonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("vector length {got} does not match dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero denominator in Rayleigh quotient")]
    ZeroDenominator,

    #[error("vector must be strictly positive (entry {index} = {value:e})")]
    NotPositive { index: usize, value: f64 },

    #[error("right-hand side not mass-orthogonal to the eigenvector (overlap {overlap:e})")]
    NotOrthogonal { overlap: f64 },

    #[error("eigenvalue {index} is not simple (gap {gap:e} below threshold {threshold:e})")]
    NearDegenerate {
        index: usize,
        gap: f64,
        threshold: f64,
    },

    #[error("invalid group element or voltage: {0}")]
    InvalidVoltage(String),

    #[error("radius 0 truncation with nontrivial voltages has no interior")]
    NoInterior,

    #[error("twisted operator is not hermitian (defect {0:e})")]
    NonHermitian(f64),

    #[error("tie between vertices {0} and {1}")]
    Tie(usize, usize),

    #[error("truncation too small to attach basin {basin}")]
    TruncationTooSmall { basin: usize },

    #[error("no consistent attachment: {0}")]
    NoAttachment(String),

    #[error("invalid fundamental domain: {0}")]
    InvalidDomain(String),

    #[error("dimension {dim} above dense limit {limit}; use the Monte Carlo path")]
    TooLarge { dim: usize, limit: usize },

    #[error("survival fit failed: {0}")]
    FitFailure(String),

    #[error("lambda {lambda} not below lambda0 {lambda0} minus margin")]
    LambdaTooLarge { lambda: f64, lambda0: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("walk exceeded {0} steps without absorption")]
    WalkBudget(u64),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::InvalidComplex(_) => "invalid_complex",
            Error::NonPositiveCotangent { .. } => "non_positive_cotangent",
            Error::Disconnected { .. } => "disconnected",
            Error::EmptyInterior => "empty_interior",
            Error::InvalidExhaustion(_) => "invalid_exhaustion",
            Error::KTooLarge { .. } => "k_too_large",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroDenominator => "zero_denominator",
            Error::NotPositive { .. } => "not_positive",
            Error::NotOrthogonal { .. } => "not_orthogonal",
            Error::NearDegenerate { .. } => "near_degenerate",
            Error::InvalidVoltage(_) => "invalid_voltage",
            Error::NoInterior => "no_interior",
            Error::NonHermitian(_) => "non_hermitian",
            Error::Tie(..) => "tie",
            Error::TruncationTooSmall { .. } => "truncation_too_small",
            Error::NoAttachment(_) => "no_attachment",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::TooLarge { .. } => "too_large",
            Error::FitFailure(_) => "fit_failure",
            Error::LambdaTooLarge { .. } => "lambda_too_large",
            Error::InvalidConfig(_) => "invalid_config",
            Error::WalkBudget(_) => "walk_budget",
            Error::InvalidPerturbation(_) => "invalid_perturbation",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
