//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A point fell outside the domain of a scale, generator, or distribution.
    #[error("point {z} is outside the domain ({context})")]
    Domain { z: f64, context: String },

    /// An evaluation overflowed or produced a non-finite value.
    #[error("non-finite value while evaluating {context} at {z}")]
    NonFinite { z: f64, context: String },

    /// Composition rejected: the inner scale's image is not contained in the
    /// outer scale's domain.
    #[error("scale composition domain mismatch: {0}")]
    DomainMismatch(String),

    /// Inputs cannot support the requested computation (constant regressor,
    /// empty data, mismatched lengths, repeated grid points, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Generator iteration left the domain at the given step.
    #[error("generator iterate left the domain at step {step} (z = {z})")]
    IterateDomain { step: usize, z: f64 },

    /// Quadrature failed to meet the tolerance within the subdivision limit.
    #[error("quadrature did not converge: {0}")]
    NonConverged(String),

    /// The integral is infinite or the normalization mass is zero.
    #[error("integral is divergent or carries no mass ({0})")]
    Divergent(String),

    /// Rate solving found no sign change inside the search bracket.
    #[error("no rate bracket: target average {target} is not attained for lambda in [{lo:e}, {hi:e}]")]
    Bracket { target: f64, lo: f64, hi: f64 },

    /// The scale's derivative changes sign more than once on the probe grid.
    #[error("scale is not unimodal-down: derivative changes sign {sign_changes} times on the probe grid")]
    MultiModal { sign_changes: usize },

    /// Radial coordinate requested where T(z) < T* beyond tolerance.
    #[error("negative radicand at z = {z}: scale value sits {deficit:e} below the minimum")]
    NegativeRadicand { z: f64, deficit: f64 },

    /// Circular partition of a negative total.
    #[error("cannot partition negative total {total}")]
    NegativeTotal { total: f64 },

    /// Square-root partition of a vector with negative entries.
    #[error("negative probability {p} at index {index}")]
    NegativeProbability { p: f64, index: usize },

    /// Invalid family or scale parameters.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Fit rejected: the initial point or the data is infeasible for the family.
    #[error("infeasible fit input: {0}")]
    InfeasibleInit(String),

    /// Optimizer stopped at the iteration cap; carries the best point found.
    #[error("fit did not converge within {iterations} iterations (best log-likelihood {best_log_likelihood})")]
    FitNonConverged {
        iterations: usize,
        best_log_likelihood: f64,
        best_params: Vec<(String, f64)>,
    },

    /// Malformed configuration or data file.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure surfaced through the CLI.
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(z: f64, context: impl Into<String>) -> Self {
        Error::Domain { z, context: context.into() }
    }

    pub(crate) fn non_finite(z: f64, context: impl Into<String>) -> Self {
        Error::NonFinite { z, context: context.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
