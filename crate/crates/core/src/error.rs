use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),
    #[error("invalid test function: {0}")]
    InvalidFunction(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("non-integrable configuration: {0}")]
    NonIntegrable(String),
    #[error("momentum window required: {0}")]
    MomentumWindowRequired(String),
    #[error("trace-class configuration violated: {0}")]
    TraceClassViolated(String),
    #[error("test function undefined at {value:.17e} (allowed range [{lo}, {hi}])")]
    OutsideFunctionDomain { value: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge: value {value:.6e}, error estimate {est_error:.3e} after {nodes} nodes")]
    Quadrature {
        value: f64,
        est_error: f64,
        nodes: usize,
    },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),
    #[error("invalid config at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("L = {l}: {source}")]
    AtScale {
        l: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed operator dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
