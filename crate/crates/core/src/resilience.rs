//! Resilience-value components beyond the stochastic-income channel:
//! avoided hazard damage, the option value of species redundancy, portfolio
//! diversification of service values, management-practice value, and regime
//! comparison.
//!
//! Only the insurance-value component (A) has a closed-form theory behind
//! it; the others are deliberately minimal, standard operationalizations of
//! the qualitative principles they quantify: expected avoided damage (B),
//! expectation-of-max substitution value (C), variance shortfall against a
//! perfectly correlated benchmark (C), and deltas of optimized certainty
//! equivalents under parameter shifts (D). [`resilience_report`] presents
//! the components side by side and never sums them: they overlap (insurance
//! value and diversification both flow from variance reduction), so a total
//! would double count.

use serde::{Deserialize, Serialize};

use crate::model::{BiodiversityLevel, ScenarioSpec};
use crate::optimize;
use crate::valuation;
use crate::{Error, Result};

/// Sum tolerance for probability and weight simplices.
const SIMPLEX_TOLERANCE: f64 = 1e-9;
/// Allowed asymmetry in a covariance matrix.
const SYMMETRY_TOLERANCE: f64 = 1e-9;
/// Most negative eigenvalue a covariance matrix may have (rounding slack).
const PSD_TOLERANCE: f64 = -1e-8;

/// A recurring hazard and the per-event damage with and without the
/// risk-reducing intervention in place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardDamageSpec {
    /// Probability of the hazard striking in any one period, in `[0, 1]`.
    pub event_probability: f64,
    /// Damage per event without the intervention (currency). Must be >= 0.
    pub damage_without: f64,
    /// Damage per event with the intervention (currency). Must be >= 0 and
    /// <= `damage_without`.
    pub damage_with: f64,
    /// Number of periods over which the hazard recurs. Must be >= 1.
    pub periods: u32,
}

impl HazardDamageSpec {
    /// Checks every field invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        self.validate_at("hazard")
    }

    pub(crate) fn validate_at(&self, path: &str) -> Result<()> {
        let field = |name: &str| format!("{path}.{name}");
        if !self.event_probability.is_finite()
            || !(0.0..=1.0).contains(&self.event_probability)
        {
            return Err(Error::invalid(
                field("event_probability"),
                "must lie in [0, 1]",
            ));
        }
        if !self.damage_without.is_finite() || self.damage_without < 0.0 {
            return Err(Error::invalid(field("damage_without"), "must be >= 0"));
        }
        if !self.damage_with.is_finite() || self.damage_with < 0.0 {
            return Err(Error::invalid(field("damage_with"), "must be >= 0"));
        }
        // An intervention that amplifies damage is a data error, not a
        // negative value.
        if self.damage_with > self.damage_without {
            return Err(Error::invalid(
                field("damage_with"),
                "must be <= damage_without",
            ));
        }
        if self.periods == 0 {
            return Err(Error::invalid(field("periods"), "must be >= 1"));
        }
        Ok(())
    }

    /// Expected cumulative damage with no intervention in place:
    /// `periods * event_probability * damage_without`.
    fn expected_baseline_damage(&self) -> f64 {
        self.periods as f64 * self.event_probability * self.damage_without
    }
}

/// One possible future state of the system: its probability and the service
/// level each species would deliver in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    /// Probability of this regime, in `[0, 1]`.
    pub probability: f64,
    /// Service delivered by each species under this regime. All >= 0;
    /// the same length in every regime.
    pub service_by_species: Vec<f64>,
}

/// A probability distribution over regimes, used to price the option of
/// substituting one species for another when conditions change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegimeScenario {
    /// The possible regimes. Probabilities must sum to 1 within 1e-9.
    pub regimes: Vec<Regime>,
}

impl RegimeScenario {
    /// Checks the probability simplex and the species-set shape, reporting
    /// the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::invalid("regimes", "must not be empty"));
        }
        let species = self.regimes[0].service_by_species.len();
        if species == 0 {
            return Err(Error::invalid(
                "regimes[0].service_by_species",
                "must not be empty",
            ));
        }
        let mut total = 0.0;
        for (i, regime) in self.regimes.iter().enumerate() {
            if !regime.probability.is_finite() || !(0.0..=1.0).contains(&regime.probability) {
                return Err(Error::invalid(
                    format!("regimes[{i}].probability"),
                    "must lie in [0, 1]",
                ));
            }
            total += regime.probability;
            if regime.service_by_species.len() != species {
                return Err(Error::invalid(
                    format!("regimes[{i}].service_by_species"),
                    "must list every regime's service for the same species",
                ));
            }
            for (j, s) in regime.service_by_species.iter().enumerate() {
                if !s.is_finite() || *s < 0.0 {
                    return Err(Error::invalid(
                        format!("regimes[{i}].service_by_species[{j}]"),
                        "must be >= 0",
                    ));
                }
            }
        }
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(
                "regimes",
                "probabilities must sum to 1",
            ));
        }
        Ok(())
    }

    fn species_count(&self) -> usize {
        self.regimes[0].service_by_species.len()
    }

    /// Expected value over regimes of the best service among `species`.
    fn expected_best(&self, species: &[usize]) -> f64 {
        self.regimes
            .iter()
            .map(|regime| {
                let best = species
                    .iter()
                    .map(|&j| regime.service_by_species[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                regime.probability * best
            })
            .sum()
    }
}

/// A weighted portfolio of service values with a covariance structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServicePortfolio {
    /// Portfolio weights on the simplex (each >= 0, summing to 1 within
    /// 1e-9).
    pub weights: Vec<f64>,
    /// Expected service value of each asset.
    pub means: Vec<f64>,
    /// Covariance of the asset values: symmetric within 1e-9 and positive
    /// semidefinite (smallest eigenvalue >= -1e-8).
    pub covariance: Vec<Vec<f64>>,
}

impl ServicePortfolio {
    /// Checks shapes, the weight simplex, symmetry, and positive
    /// semidefiniteness, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::invalid("portfolio.weights", "must not be empty"));
        }
        if self.means.len() != n {
            return Err(Error::invalid(
                "portfolio.means",
                "must match the number of weights",
            ));
        }
        if self.covariance.len() != n || self.covariance.iter().any(|row| row.len() != n) {
            return Err(Error::invalid(
                "portfolio.covariance",
                "must be square with one row per asset",
            ));
        }
        let mut total = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::invalid(
                    format!("portfolio.weights[{i}]"),
                    "must be >= 0",
                ));
            }
            total += w;
        }
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid("portfolio.weights", "must sum to 1"));
        }
        for (i, m) in self.means.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::invalid(
                    format!("portfolio.means[{i}]"),
                    "must be finite",
                ));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let c = self.covariance[i][j];
                if !c.is_finite() {
                    return Err(Error::invalid(
                        format!("portfolio.covariance[{i}][{j}]"),
                        "must be finite",
                    ));
                }
                if (c - self.covariance[j][i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::invalid(
                        "portfolio.covariance",
                        "must be symmetric",
                    ));
                }
            }
        }
        let matrix = nalgebra::DMatrix::from_fn(n, n, |i, j| self.covariance[i][j]);
        let min_eigenvalue = matrix.symmetric_eigen().eigenvalues.min();
        if min_eigenvalue < PSD_TOLERANCE {
            return Err(Error::invalid(
                "portfolio.covariance",
                "must be positive semidefinite",
            ));
        }
        Ok(())
    }
}

/// Moments of a [`ServicePortfolio`] and its diversification benefit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioStats {
    /// Expected portfolio value `w' mu`.
    pub mean: f64,
    /// Portfolio variance `w' Sigma w`.
    pub variance: f64,
    /// Variance shortfall versus perfectly correlated assets:
    /// `(sum_i w_i sd_i)^2 - w' Sigma w`. Always >= 0.
    pub diversification_benefit: f64,
}

/// Expected cumulative damage the intervention avoids:
/// `periods * event_probability * (damage_without - damage_with)`.
///
/// Linear in the event probability and in the damage gap.
pub fn avoided_damage_value(spec: &HazardDamageSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.periods as f64 * spec.event_probability * (spec.damage_without - spec.damage_with))
}

/// Value of keeping seemingly redundant species around: the expected best
/// service over regimes with the `retained` species minus the same with
/// only the `reduced` subset.
///
/// Both arguments index into the species vectors; `reduced` must be a
/// subset of `retained`, so the result is always >= 0 (a maximum over a
/// superset dominates), and it is non-decreasing as species are added to
/// `retained`.
pub fn option_value(
    scenario: &RegimeScenario,
    retained: &[usize],
    reduced: &[usize],
) -> Result<f64> {
    scenario.validate()?;
    let species = scenario.species_count();
    let check = |name: &str, subset: &[usize]| -> Result<()> {
        if subset.is_empty() {
            return Err(Error::invalid(name, "must not be empty"));
        }
        if let Some(&j) = subset.iter().find(|&&j| j >= species) {
            return Err(Error::invalid(
                name,
                format!("species index {j} is out of range (only {species} species)"),
            ));
        }
        Ok(())
    };
    check("retained", retained)?;
    check("reduced", reduced)?;
    if let Some(&j) = reduced.iter().find(|j| !retained.contains(j)) {
        return Err(Error::invalid(
            "reduced",
            format!("species index {j} is not in the retained set"),
        ));
    }
    Ok(scenario.expected_best(retained) - scenario.expected_best(reduced))
}

/// Mean, variance, and diversification benefit of a portfolio.
///
/// The benefit compares the actual variance to the worst case in which all
/// assets are perfectly correlated at the same standard deviations; by
/// Cauchy-Schwarz it is non-negative, and it is 0 exactly for comonotone
/// assets.
pub fn portfolio_stats(portfolio: &ServicePortfolio) -> Result<PortfolioStats> {
    portfolio.validate()?;
    let n = portfolio.weights.len();
    let mean: f64 = (0..n).map(|i| portfolio.weights[i] * portfolio.means[i]).sum();
    let mut variance = 0.0;
    for i in 0..n {
        for j in 0..n {
            variance += portfolio.weights[i] * portfolio.weights[j] * portfolio.covariance[i][j];
        }
    }
    let correlated_sd: f64 = (0..n)
        .map(|i| portfolio.weights[i] * portfolio.covariance[i][i].sqrt())
        .sum();
    Ok(PortfolioStats {
        mean,
        variance,
        // Non-negative in exact arithmetic; the clamp only absorbs rounding.
        diversification_benefit: (correlated_sd * correlated_sd - variance).max(0.0),
    })
}

/// Value added by a management practice that shifts the scenario parameters
/// (e.g. thinning lowers `sigma_0`) and/or the hazard exposure.
///
/// Two channels, both signed so that a beneficial practice is positive:
/// the change in the optimized certainty equivalent, plus the reduction in
/// expected baseline damage (`periods * probability * damage_without`
/// before minus after). `hazard`/`scenario` describe the status quo,
/// `modified_*` the state after adopting the practice.
pub fn practice_value(
    scenario: &ScenarioSpec,
    hazard: &HazardDamageSpec,
    modified_hazard: &HazardDamageSpec,
    modified_scenario: &ScenarioSpec,
) -> Result<f64> {
    hazard.validate_at("hazard")?;
    modified_hazard.validate_at("modified_hazard")?;
    let base = optimize::optimal_biodiversity(scenario)?;
    let modified = optimize::optimal_biodiversity(modified_scenario)?;
    let ce_gain = modified.ce_star - base.ce_star;
    let damage_reduction =
        hazard.expected_baseline_damage() - modified_hazard.expected_baseline_damage();
    Ok(ce_gain + damage_reduction)
}

/// Value at stake in a shift between two ecosystem states: the optimized
/// certainty equivalent of state A minus that of state B.
///
/// Exactly 0 for identical states and exactly antisymmetric in its
/// arguments.
pub fn regime_delta(state_a: &ScenarioSpec, state_b: &ScenarioSpec) -> Result<f64> {
    let a = optimize::optimal_biodiversity(state_a)?;
    let b = optimize::optimal_biodiversity(state_b)?;
    Ok(a.ce_star - b.ce_star)
}

/// Inputs for the components of a [`ResilienceReport`] beyond the base
/// scenario. In a scenario file these sit under the `"resilience"` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResilienceInputs {
    /// Biodiversity level at which the insurance-value component is
    /// evaluated. Pass the current stand's level to value the status quo,
    /// or an optimizer's `v_star` to value the planned state.
    pub v: BiodiversityLevel,
    /// Hazard exposure with and without the intervention (component B).
    pub hazard: HazardDamageSpec,
    /// Regime distribution for the option-value component.
    pub regimes: RegimeScenario,
    /// Species kept in the diverse configuration.
    pub retained: Vec<usize>,
    /// Species left after the contemplated reduction. Must be a subset of
    /// `retained`.
    pub reduced: Vec<usize>,
    /// Service portfolio for the diversification component.
    pub portfolio: ServicePortfolio,
    /// The state after adopting the management practice (component D).
    pub practice: PracticeInputs,
    /// Alternative ecosystem state compared against the base scenario.
    pub state_b: ScenarioSpec,
}

/// Scenario and hazard as they would look after adopting the practice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PracticeInputs {
    /// Scenario parameters after the practice.
    pub scenario: ScenarioSpec,
    /// Hazard exposure after the practice.
    pub hazard: HazardDamageSpec,
}

/// The resilience-value components of one scenario, side by side.
///
/// The components are intentionally not summed: they measure overlapping
/// channels (insurance value and diversification both flow from variance
/// reduction), so a total would double count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResilienceReport {
    /// Marginal insurance value of biodiversity at the chosen level.
    pub component_a_insurance_value: f64,
    /// Expected cumulative damage the intervention avoids.
    pub component_b_avoided_damage: f64,
    /// Expected-best-service loss avoided by retaining redundant species.
    /// Always >= 0.
    pub component_c_option_value: f64,
    /// Variance shortfall of the service portfolio versus perfectly
    /// correlated assets. Always >= 0.
    pub component_c_diversification: f64,
    /// Certainty-equivalent and damage gains from the management practice.
    pub component_d_practice_value: f64,
    /// Optimized certainty equivalent of the base scenario minus that of
    /// `state_b`.
    pub regime_delta_ce: f64,
}

/// Computes every component for one scenario. Each field equals the value
/// the corresponding standalone operation returns; any component error
/// propagates.
pub fn resilience_report(
    scenario: &ScenarioSpec,
    inputs: &ResilienceInputs,
) -> Result<ResilienceReport> {
    scenario.validate()?;
    inputs.practice.scenario.validate()?;
    inputs.state_b.validate()?;
    Ok(ResilienceReport {
        component_a_insurance_value: valuation::insurance_value(scenario, inputs.v)?,
        component_b_avoided_damage: avoided_damage_value(&inputs.hazard)?,
        component_c_option_value: option_value(&inputs.regimes, &inputs.retained, &inputs.reduced)?,
        component_c_diversification: portfolio_stats(&inputs.portfolio)?.diversification_benefit,
        component_d_practice_value: practice_value(
            scenario,
            &inputs.hazard,
            &inputs.practice.hazard,
            &inputs.practice.scenario,
        )?,
        regime_delta_ce: regime_delta(scenario, &inputs.state_b)?,
    })
}
