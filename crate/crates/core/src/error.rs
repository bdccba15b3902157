use thiserror::Error;

/// Errors raised by graph construction, spectral analysis, stability analysis and integration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no connected realization after {attempts} attempts")]
    ConnectivityRetriesExhausted { attempts: usize },

    #[error("random regular pairing failed after {attempts} attempts")]
    PairingFailed { attempts: usize },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("competition matrix is singular (a1*a2 - b1*b2 = 0)")]
    DegenerateCompetition,

    #[error("no coexistence equilibrium: (u*, v*) = ({u}, {v})")]
    NoCoexistence { u: f64, v: f64 },

    #[error("strong competition regime (a1*a2 - b1*b2 < 0) is not analysed")]
    StrongCompetition,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("eigenvectors are required but were not computed")]
    MissingEigenvectors,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
