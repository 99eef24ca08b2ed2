//! Optimal biodiversity and insurance coverage choices.
//!
//! Uninsured, the decision maker maximizes
//! `CE(v) = mu_s(v) - C(v) - (rho / 2) * sigma_s(v)^2` over `v_bounds`. At an
//! interior optimum the first-order condition `mu' + V - C' = 0` holds: the
//! marginal service gain plus the marginal self-insurance value covers the
//! marginal conservation cost.
//!
//! With a market charging loading `lambda`, coverage has the closed form
//! `alpha*(v) = clamp(1 - lambda / (rho * sigma_s(v)), 0, 1)` and the joint
//! problem maximizes the envelope `CE(v, alpha*(v))`, which is continuously
//! differentiable and strictly concave for the model's functional forms.
//! Because financial insurance substitutes for self-insurance, the joint
//! optimum never exceeds the uninsured one and is strictly below it whenever
//! any coverage is bought.
//!
//! The solver scans the FOC for descending sign changes, bisects each
//! bracket, and compares all interior and boundary candidates by certainty
//! equivalent, breaking ties toward the smallest `v`.

use serde::{Deserialize, Serialize};

use crate::model::{BiodiversityLevel, InsuranceContract, ScenarioSpec};
use crate::{Error, Result};

/// First-order-condition residual below which an interior solve counts as
/// converged.
pub const FOC_TOLERANCE: f64 = 1e-8;

/// Bracket width below which bisection stops regardless of the residual.
pub const WIDTH_TOLERANCE: f64 = 1e-10;

/// Hard cap on bisection iterations per bracket.
const MAX_ITERATIONS: u32 = 200;

/// Cells in the derivative sign scan that brackets interior optima.
const SCAN_CELLS: usize = 512;

/// Certainty-equivalent differences below this are ties, resolved toward the
/// smallest `v`.
const TIE_TOLERANCE: f64 = 1e-12;

/// Outcome of a biodiversity (or joint biodiversity-and-coverage) solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationResult {
    /// Maximizing biodiversity level.
    pub v_star: BiodiversityLevel,
    /// Coverage bought at `v_star` (0 when no market is involved).
    pub alpha_star: f64,
    /// Certainty equivalent attained at the optimum.
    pub ce_star: f64,
    /// FOC value at `v_star`; near zero for interior optima, possibly not at
    /// an active bound.
    pub foc_residual: f64,
    /// Total bisection iterations spent across all brackets.
    pub iterations: u32,
    /// Whether the reported optimum met its tolerance (always true for
    /// boundary optima, where the bound itself is the certificate).
    pub converged: bool,
}

/// Maximizes the uninsured certainty equivalent over `v_bounds`.
pub fn optimal_biodiversity(scenario: &ScenarioSpec) -> Result<OptimizationResult> {
    scenario.validate()?;
    let outcome = maximize(
        |v| ce_uninsured_at(scenario, v),
        |v| dce_uninsured_at(scenario, v),
        scenario.v_bounds.lo(),
        scenario.v_bounds.hi(),
    );
    Ok(OptimizationResult {
        v_star: BiodiversityLevel::new(outcome.v)?,
        alpha_star: 0.0,
        ce_star: outcome.value,
        foc_residual: outcome.residual,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Closed-form optimal coverage at a fixed biodiversity level:
/// `clamp(1 - lambda / (rho * sigma_s(v)), 0, 1)`.
///
/// Fair insurance (`lambda = 0`) buys full coverage; a loading at or above
/// `rho * sigma_s(v)` prices insurance out entirely. A risk-neutral decision
/// maker facing a positive loading buys none; with `rho = 0` and
/// `lambda = 0` every coverage level is equally good, which is reported as
/// [`Error::IndeterminateCoverage`] rather than an arbitrary pick.
pub fn optimal_coverage(scenario: &ScenarioSpec, v: BiodiversityLevel, lambda: f64) -> Result<f64> {
    scenario.check_bounds(v)?;
    require_lambda(lambda)?;
    let rho = scenario.preference.rho;
    if rho == 0.0 {
        return if lambda == 0.0 {
            Err(Error::IndeterminateCoverage)
        } else {
            Ok(0.0)
        };
    }
    let sigma = scenario.service.moments(v).sigma;
    Ok((1.0 - lambda / (rho * sigma)).clamp(0.0, 1.0))
}

/// Maximizes the envelope `CE(v, alpha*(v))` over `v_bounds` and reports the
/// optimal pair.
///
/// When the loading is high enough that `alpha*(v) = 0` across the whole
/// interval, the objective and solver path coincide with
/// [`optimal_biodiversity`], so the results are identical, not merely close.
pub fn joint_optimum(scenario: &ScenarioSpec, lambda: f64) -> Result<OptimizationResult> {
    scenario.validate()?;
    require_lambda(lambda)?;
    if scenario.preference.rho == 0.0 && lambda == 0.0 {
        return Err(Error::IndeterminateCoverage);
    }
    let outcome = maximize(
        |v| ce_joint_at(scenario, lambda, v),
        |v| dce_joint_at(scenario, lambda, v),
        scenario.v_bounds.lo(),
        scenario.v_bounds.hi(),
    );
    let v_star = BiodiversityLevel::new(outcome.v)?;
    let alpha_star = optimal_coverage(scenario, v_star, lambda)?;
    Ok(OptimizationResult {
        v_star,
        alpha_star,
        ce_star: outcome.value,
        foc_residual: outcome.residual,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// First-order condition `dCE/dv` at a fixed `(v, alpha, lambda)`:
/// `mu' - C' - lambda * alpha * sigma' - rho * (1 - alpha)^2 * sigma * sigma'`.
///
/// With `alpha = 0` this reduces to `mu' + V - C'`, the uninsured condition.
pub fn foc_residual(
    scenario: &ScenarioSpec,
    v: BiodiversityLevel,
    alpha: f64,
    lambda: f64,
) -> Result<f64> {
    scenario.check_bounds(v)?;
    InsuranceContract { alpha, lambda }.validate("contract")?;
    let m = scenario.service.moments(v);
    let c = scenario.cost.eval(v);
    let retained = 1.0 - alpha;
    Ok(m.dmu
        - c.dcost
        - lambda * alpha * m.dsigma
        - scenario.preference.rho * retained * retained * m.sigma * m.dsigma)
}

fn require_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid("lambda", "must be finite and >= 0"));
    }
    Ok(())
}

fn ce_uninsured_at(scenario: &ScenarioSpec, v: f64) -> f64 {
    let m = scenario.service.moments_at(v);
    let c = scenario.cost.eval_at(v);
    (m.mu - c.cost) - 0.5 * scenario.preference.rho * m.sigma * m.sigma
}

fn dce_uninsured_at(scenario: &ScenarioSpec, v: f64) -> f64 {
    let m = scenario.service.moments_at(v);
    let c = scenario.cost.eval_at(v);
    (m.dmu - c.dcost) - scenario.preference.rho * m.sigma * m.dsigma
}

/// Envelope objective. On the insured branch (`rho * sigma > lambda`) the
/// optimal-coverage algebra collapses to
/// `mu - C - lambda * sigma + lambda^2 / (2 rho)`; elsewhere it is exactly
/// the uninsured certainty equivalent (shared code, so the joint solve
/// degrades to the uninsured one bit for bit when coverage is never bought).
fn ce_joint_at(scenario: &ScenarioSpec, lambda: f64, v: f64) -> f64 {
    let rho = scenario.preference.rho;
    let m = scenario.service.moments_at(v);
    if rho * m.sigma > lambda {
        let c = scenario.cost.eval_at(v);
        (m.mu - c.cost) - lambda * m.sigma + lambda * lambda / (2.0 * rho)
    } else {
        ce_uninsured_at(scenario, v)
    }
}

/// Envelope derivative; by the envelope theorem the `d alpha*/dv` term drops
/// out, leaving `mu' - C' - lambda * sigma'` on the insured branch.
fn dce_joint_at(scenario: &ScenarioSpec, lambda: f64, v: f64) -> f64 {
    let rho = scenario.preference.rho;
    let m = scenario.service.moments_at(v);
    if rho * m.sigma > lambda {
        let c = scenario.cost.eval_at(v);
        (m.dmu - c.dcost) - lambda * m.dsigma
    } else {
        dce_uninsured_at(scenario, v)
    }
}

struct Outcome {
    v: f64,
    value: f64,
    residual: f64,
    iterations: u32,
    converged: bool,
}

#[derive(Clone, Copy)]
struct Candidate {
    v: f64,
    value: f64,
    residual: f64,
    converged: bool,
}

/// Maximizes `f` on `[lo, hi]` given its derivative `g`.
///
/// Strategy: evaluate `g` on a uniform scan, bisect every cell where it
/// crosses from positive to negative (each such cell holds a local maximum),
/// and compare the resulting interior candidates with both endpoints by
/// objective value. Boundary candidates count as converged with the raw FOC
/// residual attached. Ties within [`TIE_TOLERANCE`] resolve to the smallest
/// `v`.
fn maximize(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Outcome {
    let node = |i: usize| {
        if i == SCAN_CELLS {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / SCAN_CELLS as f64)
        }
    };
    let gs: Vec<f64> = (0..=SCAN_CELLS).map(|i| g(node(i))).collect();

    let mut candidates = vec![
        Candidate {
            v: lo,
            value: f(lo),
            residual: gs[0],
            converged: true,
        },
        Candidate {
            v: hi,
            value: f(hi),
            residual: gs[SCAN_CELLS],
            converged: true,
        },
    ];

    for (i, &gi) in gs.iter().enumerate() {
        if gi == 0.0 {
            // The FOC holds exactly at a scan node; no bisection needed.
            candidates.push(Candidate {
                v: node(i),
                value: f(node(i)),
                residual: 0.0,
                converged: true,
            });
        }
    }

    let mut iterations = 0u32;
    for i in 0..SCAN_CELLS {
        if !(gs[i] > 0.0 && gs[i + 1] < 0.0) {
            continue;
        }
        let (mut a, mut b) = (node(i), node(i + 1));
        let mut mid = 0.5 * (a + b);
        let mut gm = g(mid);
        let mut converged = false;
        loop {
            iterations += 1;
            if gm.abs() <= FOC_TOLERANCE || b - a <= WIDTH_TOLERANCE {
                converged = true;
                break;
            }
            if iterations >= MAX_ITERATIONS {
                break;
            }
            if gm > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            mid = 0.5 * (a + b);
            gm = g(mid);
        }
        candidates.push(Candidate {
            v: mid,
            value: f(mid),
            residual: gm,
            converged,
        });
    }

    let mut best = candidates[0];
    for c in &candidates[1..] {
        let strictly_better = c.value > best.value + TIE_TOLERANCE;
        let tied_but_lower_v = c.value >= best.value - TIE_TOLERANCE && c.v < best.v;
        if strictly_better || tied_but_lower_v {
            best = *c;
        }
    }
    Outcome {
        v: best.v,
        value: best.value,
        residual: best.residual,
        iterations,
        converged: best.converged,
    }
}
