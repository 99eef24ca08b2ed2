//! Shared oracles for the integration suites.
//!
//! Everything here is computed from first principles, independent of the
//! library's evaluation paths: expected utility by Gauss-Hermite
//! quadrature, objectives written straight from their defining formulas,
//! and brute-force grid argmax searches. The tests compare library outputs
//! against these.

#![allow(dead_code)]

use natcap_core::model::{
    CostModel, RiskPreference, ScenarioSpec, ServiceModel, VBounds,
};
use rand::rngs::StdRng;
use rand::Rng;

/// Gauss-Hermite rule: nodes and weights for integrals against
/// `exp(-x^2)`.
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Computes an `n`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence (no factorials, so no overflow at large `n`).
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            // Stroud-Secrest style initial guesses, refined by Newton.
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 5e-15 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        GaussHermite { nodes, weights }
    }

    /// `E[f(Z)]` for standard normal `Z`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(std::f64::consts::SQRT_2 * x))
            .sum();
        sum / std::f64::consts::PI.sqrt()
    }

    /// Certainty equivalent of `N(mean, sd^2)` income under CARA utility
    /// `u(y) = -exp(-rho y) / rho`, by inverting the quadrature of
    /// `E[u(Y)]`. The mean factors out of the expectation, so only the
    /// centered part is integrated numerically.
    pub fn cara_certainty_equivalent(&self, rho: f64, mean: f64, sd: f64) -> f64 {
        // Envelope checked against a reference implementation: the
        // 100-point rule is exact to ~1e-14 for rho * sd up to 12.
        assert!(rho * sd <= 12.0, "case outside the validated quadrature envelope");
        if rho == 0.0 {
            return mean;
        }
        let m = self.expect(|z| (-rho * sd * z).exp());
        mean - m.ln() / rho
    }

    /// Risk premium implied by the quadrature certainty equivalent.
    pub fn cara_risk_premium(&self, rho: f64, mean: f64, sd: f64) -> f64 {
        mean - self.cara_certainty_equivalent(rho, mean, sd)
    }
}

/// Mean service income at `v`, straight from the saturating-exponential
/// definition.
pub fn raw_mu(s: &ScenarioSpec, v: f64) -> f64 {
    s.service.mu_max * (1.0 - (-s.service.k_mu * v).exp())
}

/// Service volatility at `v`, straight from the decaying-exponential
/// definition.
pub fn raw_sigma(s: &ScenarioSpec, v: f64) -> f64 {
    s.service.sigma_0 * (-s.service.k_sigma * v).exp()
}

/// Maintenance cost at `v`, straight from the quadratic definition.
pub fn raw_cost(s: &ScenarioSpec, v: f64) -> f64 {
    s.cost.c1 * v + s.cost.c2 * v * v
}

/// Uninsured certainty equivalent at `v` from the defining formulas:
/// `mu - cost - (rho/2) sigma^2`.
pub fn raw_ce(s: &ScenarioSpec, v: f64) -> f64 {
    let sigma = raw_sigma(s, v);
    raw_mu(s, v) - raw_cost(s, v) - 0.5 * s.preference.rho * sigma * sigma
}

/// Certainty equivalent at `v` under a coinsurance contract `(alpha,
/// lambda)`, from the defining formulas: the insurer takes `alpha` of the
/// deviations for a premium of `lambda alpha sigma`.
pub fn raw_ce_insured(s: &ScenarioSpec, v: f64, alpha: f64, lambda: f64) -> f64 {
    let sigma = raw_sigma(s, v);
    let kept = (1.0 - alpha) * sigma;
    raw_mu(s, v) - raw_cost(s, v) - lambda * alpha * sigma
        - 0.5 * s.preference.rho * kept * kept
}

/// Argmax of `f` over the inclusive grid `lo, lo+step, ..., hi`. Returns
/// `(x_best, f(x_best))`.
pub fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    assert!(lo < hi && step > 0.0);
    let cells = ((hi - lo) / step).round() as u64;
    let mut best_x = lo;
    let mut best_y = f(lo);
    for i in 1..=cells {
        let x = if i == cells { hi } else { lo + step * i as f64 };
        let y = f(x);
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }
    (best_x, best_y)
}

/// Draws a scenario whose optimum is always interior: the income slope at
/// v = 0 beats the cost slope, and by v = 30 the quadratic cost dominates
/// both the flattened income curve and the volatility relief.
pub fn random_scenario(rng: &mut StdRng) -> ScenarioSpec {
    ScenarioSpec {
        service: ServiceModel {
            mu_max: rng.random_range(5.0..20.0),
            k_mu: rng.random_range(0.1..0.6),
            sigma_0: rng.random_range(0.5..4.0),
            k_sigma: rng.random_range(0.05..0.5),
        },
        cost: CostModel {
            c1: rng.random_range(0.0..0.2),
            c2: rng.random_range(0.01..0.2),
        },
        preference: RiskPreference {
            rho: rng.random_range(0.2..3.0),
        },
        market: None,
        v_bounds: VBounds(0.0, 30.0),
    }
}

/// Like [`random_scenario`] but with `rho * sigma` capped near 1.4, where
/// the utility draws are light-tailed enough for Monte Carlo standard
/// errors at n = 1e5 to have near-nominal 3-sigma coverage.
pub fn random_mc_scenario(rng: &mut StdRng) -> ScenarioSpec {
    let mut s = random_scenario(rng);
    s.service.sigma_0 = rng.random_range(0.2..1.2);
    s.preference.rho = rng.random_range(0.2..1.2);
    s
}
