use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("non-finite integrand value {value} at quadrature node {node:?}")]
    Evaluation { node: Vec<f64>, value: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue} below -{tolerance}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry})")]
    NotSymmetric { asymmetry: f64 },

    #[error("{}", divergence_message(*.step, *.trajectory))]
    Divergence { step: usize, trajectory: Option<u64> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error("trajectory carries no action record")]
    MissingActions,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn divergence_message(step: usize, trajectory: Option<u64>) -> String {
    match trajectory {
        Some(index) => format!("trajectory {index} diverged: non-finite state at step {step}"),
        None => format!("non-finite state at step {step}"),
    }
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attach a trajectory index to a divergence error; other variants pass through.
    pub fn with_trajectory(self, index: u64) -> Self {
        match self {
            Error::Divergence { step, .. } => Error::Divergence {
                step,
                trajectory: Some(index),
            },
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Domain(_) | Error::GridMismatch(_) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }

    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Domain(_) => "domain",
            Error::Evaluation { .. } => "evaluation",
            Error::NotPsd { .. } => "not_psd",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::Divergence { .. } => "divergence",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Fit(_) => "fit",
            Error::MissingActions => "missing_actions",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
