use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} index {index} out of range (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("no simple bipartite graph with bank degree {degree} over {n_assets} assets after {attempts} attempts")]
    RegularGraph {
        degree: usize,
        n_assets: usize,
        attempts: usize,
    },

    #[error("system has already been shocked")]
    AlreadyShocked,

    #[error(
        "power iteration did not converge after {iterations} iterations (last estimate {estimate})"
    )]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("xi_1 - 1 does not change sign on [{lo}, {hi}] (xi_1 = {xi_lo} and {xi_hi})")]
    NoBracket {
        lo: f64,
        hi: f64,
        xi_lo: f64,
        xi_hi: f64,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
