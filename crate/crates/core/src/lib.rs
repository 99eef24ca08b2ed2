//! Core valuation engine for biodiversity-backed risk reduction in managed
//! ecosystems, built around a single income model: a stochastic ecosystem
//! service with biodiversity-dependent mean and dispersion, a conservation
//! cost, and a constant-absolute-risk-aversion decision maker.
//!
//! The crate is organized by concern:
//!
//! * [`model`] holds the parametric forms and scenario validation.
//! * [`valuation`] prices risk: premiums, certainty equivalents, and the
//!   marginal value of biodiversity as self-insurance.
//! * [`optimize`] solves for optimal biodiversity and insurance coverage.
//! * [`montecarlo`] cross-checks closed forms by seeded simulation and runs
//!   the buffer-pool reversal model.
//! * [`resilience`] prices the remaining resilience components: avoided
//!   hazard damage, option value of retained species, portfolio
//!   diversification, and management practices.
//!
//! All randomness flows through counter-based substreams so results are
//! bit-identical for a given seed regardless of thread count.

pub mod error;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod resilience;
pub mod valuation;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
