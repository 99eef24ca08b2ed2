//! Parametric forms for the ecosystem service, conservation cost, risk
//! preference, and insurance contract, plus scenario-level validation.
//!
//! Conventions used throughout the crate:
//!
//! * `v` is the biodiversity level of the managed stand (for example an
//!   effective species count). It is non-negative by construction.
//! * Conditional on `v`, the ecosystem service `s` is normal with mean
//!   `mu_s(v) = mu_max * (1 - exp(-k_mu * v))` and standard deviation
//!   `sigma_s(v) = sigma_0 * exp(-k_sigma * v)`: more diverse stands yield a
//!   higher mean service level and a less variable one.
//! * Maintaining diversity costs `C(v) = c1 * v + c2 * v^2`.
//! * The decision maker has constant absolute risk aversion `rho`.
//!
//! Scenario JSON uses exactly the field names of these structs; unknown
//! fields are rejected so typos fail loudly instead of silently defaulting.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Non-negative, finite biodiversity level.
///
/// Constructed through [`BiodiversityLevel::new`] (or `TryFrom<f64>`), which
/// rejects NaN, infinities, and negative values, so every instance is safe to
/// feed into the model without re-checking. Serializes as a plain number.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BiodiversityLevel(f64);

impl BiodiversityLevel {
    /// Validates and wraps a raw level.
    pub fn new(v: f64) -> Result<Self> {
        Self::try_from(v)
    }

    /// The raw level.
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BiodiversityLevel {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::invalid("v", "must be finite"));
        }
        if v < 0.0 {
            return Err(Error::invalid("v", "must be >= 0"));
        }
        Ok(BiodiversityLevel(v))
    }
}

impl From<BiodiversityLevel> for f64 {
    fn from(v: BiodiversityLevel) -> f64 {
        v.0
    }
}

impl std::fmt::Display for BiodiversityLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Saturating mean / decaying dispersion model of the ecosystem service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceModel {
    /// Asymptotic mean service level, approached as `v` grows. Must be > 0.
    pub mu_max: f64,
    /// Rate at which the mean saturates in `v`. Must be > 0.
    pub k_mu: f64,
    /// Service standard deviation of a bare stand (`v = 0`). Must be > 0.
    pub sigma_0: f64,
    /// Rate at which diversity dampens dispersion. Must be >= 0; zero turns
    /// the self-insurance channel off entirely.
    pub k_sigma: f64,
}

/// Mean, standard deviation, and their derivatives at one biodiversity level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceMoments {
    /// `mu_s(v)`, in service units.
    pub mu: f64,
    /// `sigma_s(v)`, strictly positive.
    pub sigma: f64,
    /// `d mu_s / dv`, strictly positive.
    pub dmu: f64,
    /// `d sigma_s / dv`, <= 0.
    pub dsigma: f64,
}

impl ServiceModel {
    /// Evaluates the service mean, dispersion, and their derivatives at `v`.
    pub fn moments(&self, v: BiodiversityLevel) -> ServiceMoments {
        self.moments_at(v.value())
    }

    /// Raw-`f64` evaluation used by solver loops; `v` must already be
    /// validated non-negative.
    pub(crate) fn moments_at(&self, v: f64) -> ServiceMoments {
        let decay_mu = (-self.k_mu * v).exp();
        let sigma = self.sigma_0 * (-self.k_sigma * v).exp();
        ServiceMoments {
            mu: self.mu_max * (1.0 - decay_mu),
            sigma,
            dmu: self.mu_max * self.k_mu * decay_mu,
            dsigma: -self.k_sigma * sigma,
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        require_positive(path, "mu_max", self.mu_max)?;
        require_positive(path, "k_mu", self.k_mu)?;
        require_positive(path, "sigma_0", self.sigma_0)?;
        require_non_negative(path, "k_sigma", self.k_sigma)
    }
}

/// Quadratic conservation cost `C(v) = c1 * v + c2 * v^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Linear cost coefficient. Must be >= 0.
    pub c1: f64,
    /// Quadratic cost coefficient. Must be >= 0.
    pub c2: f64,
}

/// Cost level and marginal cost at one biodiversity level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEval {
    /// `C(v)`.
    pub cost: f64,
    /// `dC/dv = c1 + 2 * c2 * v`, >= 0 on the admissible domain.
    pub dcost: f64,
}

impl CostModel {
    /// Evaluates the cost and its marginal at `v`.
    pub fn eval(&self, v: BiodiversityLevel) -> CostEval {
        self.eval_at(v.value())
    }

    pub(crate) fn eval_at(&self, v: f64) -> CostEval {
        CostEval {
            cost: self.c1 * v + self.c2 * v * v,
            dcost: self.c1 + 2.0 * self.c2 * v,
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        require_non_negative(path, "c1", self.c1)?;
        require_non_negative(path, "c2", self.c2)
    }
}

/// Constant absolute risk aversion of the decision maker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskPreference {
    /// Absolute risk aversion. Must be >= 0; zero means risk neutral.
    pub rho: f64,
}

impl RiskPreference {
    fn validate(&self, path: &str) -> Result<()> {
        require_non_negative(path, "rho", self.rho)
    }
}

/// Coinsurance contract: coverage share `alpha` of the service shortfall at
/// proportional premium loading `lambda`.
///
/// With coverage `alpha`, the insurer absorbs an `alpha` share of service
/// deviations in exchange for a premium `lambda * alpha * sigma_s(v)`, so net
/// income has mean `mu_s(v) - C(v) - lambda * alpha * sigma_s(v)` and
/// standard deviation `(1 - alpha) * sigma_s(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsuranceContract {
    /// Coverage share, in `[0, 1]`.
    pub alpha: f64,
    /// Premium loading per unit of covered dispersion. Must be >= 0;
    /// zero is an actuarially fair contract.
    pub lambda: f64,
}

impl InsuranceContract {
    /// Validates and builds a contract.
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        let contract = InsuranceContract { alpha, lambda };
        contract.validate("contract")?;
        Ok(contract)
    }

    pub(crate) fn validate(&self, path: &str) -> Result<()> {
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("{path}.alpha"), "must lie in [0, 1]"));
        }
        require_non_negative(path, "lambda", self.lambda)
    }
}

/// Insurance market parameters available to the optimizer. Only the premium
/// loading is exogenous; coverage is chosen endogenously.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsuranceMarket {
    /// Premium loading per unit of covered dispersion. Must be >= 0.
    pub lambda: f64,
}

impl InsuranceMarket {
    fn validate(&self, path: &str) -> Result<()> {
        require_non_negative(path, "lambda", self.lambda)
    }
}

/// Closed admissible interval for the biodiversity level, serialized as
/// `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VBounds(pub f64, pub f64);

impl VBounds {
    /// Lower bound.
    pub fn lo(&self) -> f64 {
        self.0
    }

    /// Upper bound.
    pub fn hi(&self) -> f64 {
        self.1
    }

    /// Whether `v` lies in the closed interval.
    pub fn contains(&self, v: f64) -> bool {
        v >= self.0 && v <= self.1
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !self.0.is_finite() || !self.1.is_finite() {
            return Err(Error::invalid(path, "must be a pair of finite numbers"));
        }
        if !(0.0 <= self.0 && self.0 < self.1) {
            return Err(Error::invalid(path, "must satisfy 0 <= v_lo < v_hi"));
        }
        Ok(())
    }
}

/// A complete, self-contained valuation scenario.
///
/// `market` is optional: when absent, the optimizer only solves the
/// uninsured problem. Unknown JSON fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Ecosystem service response to biodiversity.
    pub service: ServiceModel,
    /// Conservation cost schedule.
    pub cost: CostModel,
    /// Decision maker's risk preference.
    pub preference: RiskPreference,
    /// Insurance market, if one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<InsuranceMarket>,
    /// Admissible biodiversity interval `[v_lo, v_hi]`.
    pub v_bounds: VBounds,
}

impl ScenarioSpec {
    /// Checks every scenario invariant and reports the first violation with
    /// its dotted field path (for example `service.sigma_0 must be > 0`).
    pub fn validate(&self) -> Result<()> {
        self.service.validate("service")?;
        self.cost.validate("cost")?;
        self.preference.validate("preference")?;
        if let Some(market) = &self.market {
            market.validate("market")?;
        }
        self.v_bounds.validate("v_bounds")
    }

    /// Errors with [`Error::OutOfBounds`] unless `v` lies in `v_bounds`.
    pub fn check_bounds(&self, v: BiodiversityLevel) -> Result<()> {
        if self.v_bounds.contains(v.value()) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                v: v.value(),
                lo: self.v_bounds.lo(),
                hi: self.v_bounds.hi(),
            })
        }
    }

    /// Premium loading of the market, if a market exists.
    pub fn market_lambda(&self) -> Option<f64> {
        self.market.map(|m| m.lambda)
    }
}

fn require_positive(path: &str, field: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("{path}.{field}"), "must be finite"));
    }
    if x <= 0.0 {
        return Err(Error::invalid(format!("{path}.{field}"), "must be > 0"));
    }
    Ok(())
}

fn require_non_negative(path: &str, field: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("{path}.{field}"), "must be finite"));
    }
    if x < 0.0 {
        return Err(Error::invalid(format!("{path}.{field}"), "must be >= 0"));
    }
    Ok(())
}
