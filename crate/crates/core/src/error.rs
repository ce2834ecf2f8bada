use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Fock truncation exceeded: tail population {tail:.3e} above threshold {threshold:.1e} (n_max = {n_max})")]
    Truncation { tail: f64, threshold: f64, n_max: usize },

    #[error("closed-form result requires symmetric Dicke weights |c_m| = |c_-m|")]
    NonSymmetricWeights,

    #[error("phase is undefined at |beta| = 0; the |beta| entry is {abs_entry}")]
    DegeneratePhase { abs_entry: f64 },

    #[error("protocol requires an even number of spins, got N = {0}")]
    UnsupportedParity(usize),

    #[error("ill-conditioned Fisher quotient: {0}")]
    IllConditioned(String),

    #[error("integrator tolerance not met: {0}")]
    ToleranceNotMet(String),

    #[error(
        "no repetition count up to {p_max} reached fidelity {threshold}; best was {best_fidelity:.6} at P = {best_p}"
    )]
    NoFeasibleP {
        p_max: u32,
        threshold: f64,
        best_fidelity: f64,
        best_p: u32,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed dataset: {0}")]
    Format(String),
}

impl From<std::io::Error> for SdsError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SdsError>;
