//! Error type shared across the engine.
//!
//! Validation failures always name the offending field as a dotted path from
//! the scenario root (for example `service.sigma_0`) so callers can surface
//! actionable messages without re-parsing input.

use thiserror::Error;

/// Everything that can go wrong when validating inputs or evaluating the
/// model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input field violates a documented invariant. `field` is the dotted
    /// path from the scenario root; `reason` completes the sentence.
    #[error("{field} {reason}")]
    Invalid { field: String, reason: String },

    /// A biodiversity level falls outside the scenario's `v_bounds`.
    #[error("v = {v} lies outside v_bounds [{lo}, {hi}]")]
    OutOfBounds { v: f64, lo: f64, hi: f64 },

    /// A finite-difference stencil `[v - h, v + h]` does not fit inside
    /// `v_bounds`, so the derivative cannot be formed without extrapolating.
    #[error(
        "finite-difference stencil [{lo}, {hi}] leaves v_bounds [{bound_lo}, {bound_hi}]; \
         move v inward or shrink the step"
    )]
    StencilOutsideBounds {
        lo: f64,
        hi: f64,
        bound_lo: f64,
        bound_hi: f64,
    },

    /// With `rho = 0` and `lambda = 0` every coverage level yields the same
    /// certainty equivalent, so no single optimum exists.
    #[error(
        "optimal coverage is indeterminate: rho = 0 and lambda = 0 make every \
         coverage level equivalent"
    )]
    IndeterminateCoverage,

    /// An iterative solve exhausted its iteration budget without meeting its
    /// tolerance.
    #[error("solver failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: u32, residual: f64 },

    /// A computed quantity came out NaN or infinite.
    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },
}

impl Error {
    /// Shorthand for [`Error::Invalid`] so validation code stays readable.
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
