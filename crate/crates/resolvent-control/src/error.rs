//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, assemblers and the batch pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the admissible domain (e.g. `s > t` in a resolvent
    /// evaluation, or a non-positive regularization parameter).
    #[error("domain error: {0}")]
    Domain(String),

    /// A user-supplied map produced a NaN or infinity; the message names the
    /// map and the probe point.
    #[error("non-finite sample: {0}")]
    NonFinite(String),

    /// Fixed-point iteration did not reach the requested tolerance. The
    /// distance sequence is carried for diagnosis.
    #[error("{context} did not converge after {iterations} iterations (last distances {tail:?})")]
    NonConvergence {
        context: &'static str,
        iterations: usize,
        distances: Vec<f64>,
        tail: Vec<f64>,
    },

    /// The time-stepper blew past the configured norm cap, which indicates
    /// the grid step is too large for the stiffness of the operators.
    #[error(
        "resolvent norm exceeded {cap:.1e} at t = {t:.6} (base s = {s:.6}); refine the grid step"
    )]
    Instability { t: f64, s: f64, cap: f64 },

    /// Config file could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A numeric invariant that should hold by construction was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn non_convergence(
        context: &'static str,
        iterations: usize,
        distances: Vec<f64>,
    ) -> Self {
        let tail = distances.iter().rev().take(4).rev().copied().collect();
        Error::NonConvergence {
            context,
            iterations,
            distances,
            tail,
        }
    }

    /// Process exit code used by the command-line front end:
    /// 2 for config problems, 3 for numeric divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NonConvergence { .. } | Error::Instability { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
