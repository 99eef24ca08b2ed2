//! Risk pricing under constant absolute risk aversion with normal income.
//!
//! For income `y ~ Normal(mean, sd)` and absolute risk aversion `rho`, the
//! risk premium is the closed form `R = (rho / 2) * sd^2` and the certainty
//! equivalent is `mean - R`. Biodiversity enters through the income moments:
//! raising `v` dampens `sigma_s(v)` and therefore lowers the premium. The
//! marginal premium reduction is the self-insurance value
//! `V(v) = -rho * sigma_s(v) * sigma_s'(v)`, exposed both in closed form
//! ([`insurance_value`]) and as a central finite difference of the premium
//! ([`insurance_value_fd`]) so the identity between the two can be audited
//! numerically.

use serde::{Deserialize, Serialize};

use crate::model::{BiodiversityLevel, InsuranceContract, RiskPreference, ScenarioSpec};
use crate::{Error, Result};

/// Default step for the finite-difference cross-check of the insurance
/// value. Small enough that truncation error is far below the documented
/// agreement tolerance, large enough to stay clear of cancellation noise.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// First two moments of net income `y = s - C(v)` (optionally reshaped by a
/// coinsurance contract).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncomeDistribution {
    /// Expected net income.
    pub mean: f64,
    /// Standard deviation of net income, >= 0.
    pub sd: f64,
}

impl IncomeDistribution {
    /// Validates and builds a distribution.
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid("income.mean", "must be finite"));
        }
        if !sd.is_finite() || sd < 0.0 {
            return Err(Error::invalid("income.sd", "must be finite and >= 0"));
        }
        Ok(IncomeDistribution { mean, sd })
    }
}

/// Everything the valuation of a single biodiversity level produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationResult {
    /// Biodiversity level the row describes.
    pub v: BiodiversityLevel,
    /// Risk premium of uninsured income at `v`.
    pub risk_premium: f64,
    /// Certainty equivalent of uninsured income at `v`.
    pub certainty_equivalent: f64,
    /// Closed-form insurance value `-rho * sigma_s(v) * sigma_s'(v)`.
    pub insurance_value: f64,
    /// Finite-difference premium slope `-(R(v+h) - R(v-h)) / (2h)`, the
    /// independent cross-check of `insurance_value`.
    pub insurance_value_fd: f64,
    /// Step `h` the cross-check used.
    pub fd_step: f64,
}

/// Risk premium `(rho / 2) * sd^2` of a normal income under CARA.
///
/// Exact, not an approximation: for exponential utility and normal income
/// the certainty equivalent is `mean - (rho / 2) * sd^2`. Risk neutrality
/// (`rho = 0`) prices risk at zero. Depends on the income distribution only
/// through `sd`, never through `mean`.
pub fn risk_premium(pref: &RiskPreference, income: &IncomeDistribution) -> f64 {
    0.5 * pref.rho * income.sd * income.sd
}

/// Certainty equivalent `mean - risk_premium`.
pub fn certainty_equivalent(pref: &RiskPreference, income: &IncomeDistribution) -> f64 {
    income.mean - risk_premium(pref, income)
}

/// Moments of net income at `v`, optionally reshaped by a coinsurance
/// contract.
///
/// Without a contract: `mean = mu_s(v) - C(v)`, `sd = sigma_s(v)`. With
/// coverage `alpha` at loading `lambda`: the premium `lambda * alpha *
/// sigma_s(v)` comes out of the mean and the retained dispersion is
/// `(1 - alpha) * sigma_s(v)`. A contract with `alpha = 0` reproduces the
/// uninsured distribution bit for bit.
pub fn net_income_distribution(
    scenario: &ScenarioSpec,
    v: BiodiversityLevel,
    contract: Option<&InsuranceContract>,
) -> Result<IncomeDistribution> {
    scenario.check_bounds(v)?;
    let m = scenario.service.moments(v);
    let c = scenario.cost.eval(v);
    let base_mean = m.mu - c.cost;
    match contract {
        None => Ok(IncomeDistribution {
            mean: base_mean,
            sd: m.sigma,
        }),
        Some(k) => {
            k.validate("contract")?;
            Ok(IncomeDistribution {
                mean: base_mean - k.lambda * k.alpha * m.sigma,
                sd: (1.0 - k.alpha) * m.sigma,
            })
        }
    }
}

/// Closed-form insurance value of biodiversity,
/// `V(v) = -rho * sigma_s(v) * sigma_s'(v)`.
///
/// This is the rate at which the risk premium falls as biodiversity rises
/// (`V = -dR/dv`), i.e. the marginal value of biodiversity acting as
/// self-insurance. Strictly positive whenever `rho > 0` and `k_sigma > 0`;
/// zero when the decision maker is risk neutral or diversity does not dampen
/// dispersion.
pub fn insurance_value(scenario: &ScenarioSpec, v: BiodiversityLevel) -> Result<f64> {
    scenario.check_bounds(v)?;
    let m = scenario.service.moments(v);
    Ok(-scenario.preference.rho * m.sigma * m.dsigma)
}

/// Central finite difference of the risk premium,
/// `-(R(v + h) - R(v - h)) / (2h)`, on uninsured income.
///
/// Deliberately routed through the premium rather than the closed form so it
/// stays an independent check of [`insurance_value`]. The stencil must fit
/// inside `v_bounds`; callers near the edge should shrink `h` or move `v`
/// inward (see [`evaluate`] for the policy the grid uses).
pub fn insurance_value_fd(scenario: &ScenarioSpec, v: BiodiversityLevel, h: f64) -> Result<f64> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::invalid("fd_step", "must be finite and > 0"));
    }
    let (lo, hi) = (scenario.v_bounds.lo(), scenario.v_bounds.hi());
    let vv = v.value();
    if vv - h < lo || vv + h > hi {
        return Err(Error::StencilOutsideBounds {
            lo: vv - h,
            hi: vv + h,
            bound_lo: lo,
            bound_hi: hi,
        });
    }
    let rho = scenario.preference.rho;
    let premium_at = |x: f64| {
        let sigma = scenario.service.moments_at(x).sigma;
        0.5 * rho * sigma * sigma
    };
    Ok(-(premium_at(vv + h) - premium_at(vv - h)) / (2.0 * h))
}

/// Values uninsured income at a single biodiversity level, bundling the
/// premium, certainty equivalent, and both forms of the insurance value.
///
/// The finite-difference stencil is re-centered inward when `v` sits within
/// one step of a bound (and the step shrunk if the interval itself is
/// narrower than two steps), so boundary grid points stay defined. The shift
/// is at most `fd_step` and therefore well inside the documented agreement
/// tolerance between the closed form and the cross-check.
pub fn evaluate(scenario: &ScenarioSpec, v: BiodiversityLevel) -> Result<ValuationResult> {
    let income = net_income_distribution(scenario, v, None)?;
    let (lo, hi) = (scenario.v_bounds.lo(), scenario.v_bounds.hi());
    let h = DEFAULT_FD_STEP.min(0.5 * (hi - lo));
    let center = v.value().clamp(lo + h, hi - h);
    Ok(ValuationResult {
        v,
        risk_premium: risk_premium(&scenario.preference, &income),
        certainty_equivalent: certainty_equivalent(&scenario.preference, &income),
        insurance_value: insurance_value(scenario, v)?,
        insurance_value_fd: insurance_value_fd(scenario, BiodiversityLevel::new(center)?, h)?,
        fd_step: h,
    })
}
