use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical blowup (non-finite state) at step {step}{}", replica_suffix(*.replica_seed))]
    Blowup { step: usize, replica_seed: Option<u64> },

    #[error(
        "no sign change in bracket: lambda({g_lo}) = {lambda_lo:.6e}, lambda({g_hi}) = {lambda_hi:.6e}"
    )]
    Bracket {
        g_lo: f64,
        lambda_lo: f64,
        g_hi: f64,
        lambda_hi: f64,
    },

    #[error("pole: z coincides with M[{index}] = {value}")]
    Pole { index: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge (achieved difference {achieved:.3e}, order {order})")]
    Quadrature { achieved: f64, order: usize },

    #[error("singular system: {0}")]
    Singular(String),
}

fn replica_suffix(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!(" (replica seed {s})"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a replica seed to a blowup error; other variants pass through.
    pub fn with_replica_seed(self, seed: u64) -> Self {
        match self {
            Error::Blowup { step, .. } => Error::Blowup {
                step,
                replica_seed: Some(seed),
            },
            other => other,
        }
    }
}
