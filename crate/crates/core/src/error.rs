use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("box of {requested} sites exceeds the configured maximum of {max}")]
    TooManySites { requested: usize, max: usize },

    #[error("box is not invariant under {0}")]
    NotInvariant(String),

    #[error("box mismatch: {0}")]
    BoxMismatch(String),

    #[error("site {0:?} lies outside the box")]
    SiteOutside(Vec<i64>),

    #[error("matrix is not Hermitian (deviation {deviation:e} relative to {scale:e})")]
    NotHermitian { deviation: f64, scale: f64 },

    #[error("eigensolver failed to converge")]
    EigenFailure,

    #[error("function undefined at {0}")]
    FunctionUndefined(f64),

    #[error("z = {re}{im:+}i lies within {distance:e} of the spectrum")]
    NearSpectrum { re: f64, im: f64, distance: f64 },

    #[error("derivatives of order {0} are not available")]
    DerivativesUnavailable(usize),

    #[error("quadrature too coarse: Richardson discrepancy {discrepancy:e} exceeds {tolerance:e}")]
    GridTooCoarse { discrepancy: f64, tolerance: f64 },

    #[error("quadrature needs n_quad >= 4 k_max (got n_quad = {n_quad}, k_max = {k_max})")]
    Aliasing { n_quad: usize, k_max: usize },

    #[error("symbol error: {0}")]
    Symbol(String),

    #[error("envelope |f| <= {c} |x|^{gamma} violated at x = {x}")]
    EnvelopeViolated { c: f64, gamma: f64, x: f64 },

    #[error("index out of range: {0}")]
    IndexRange(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("divergent partial sums: {0}")]
    Divergent(String),

    #[error("missing decay certificate for requested tolerance {0:e}")]
    MissingCertificate(f64),

    #[error("sample {sample}: {source}")]
    Sample {
        sample: u64,
        #[source]
        source: Box<LabError>,
    },

    #[error("identity check failed: {0}")]
    IdentityFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
