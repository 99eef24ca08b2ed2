//! Property tests for the library's contract invariants: randomized inputs,
//! checked against definitions and independent recomputation.

mod common;

use common::{raw_ce, raw_sigma};
use natcap_core::model::{
    BiodiversityLevel, CostModel, RiskPreference, ScenarioSpec, ServiceModel, VBounds,
};
use natcap_core::montecarlo::{
    sample_service, simulate_trial, BufferPoolSpec, SamplerConfig, Substreams,
};
use natcap_core::resilience::{
    option_value, portfolio_stats, regime_delta, Regime, RegimeScenario, ServicePortfolio,
};
use natcap_core::valuation::IncomeDistribution;
use natcap_core::{optimize, valuation};
use proptest::prelude::*;

fn scenario_strategy() -> impl Strategy<Value = ScenarioSpec> {
    (
        5.0..20.0f64,  // mu_max
        0.1..0.6f64,   // k_mu
        0.5..4.0f64,   // sigma_0
        0.05..0.5f64,  // k_sigma
        0.0..0.2f64,   // c1
        0.01..0.2f64,  // c2
        0.2..3.0f64,   // rho
    )
        .prop_map(|(mu_max, k_mu, sigma_0, k_sigma, c1, c2, rho)| ScenarioSpec {
            service: ServiceModel {
                mu_max,
                k_mu,
                sigma_0,
                k_sigma,
            },
            cost: CostModel { c1, c2 },
            preference: RiskPreference { rho },
            market: None,
            v_bounds: VBounds(0.0, 30.0),
        })
}

fn regime_scenario_strategy() -> impl Strategy<Value = RegimeScenario> {
    (1usize..5, 1usize..6).prop_flat_map(|(n_regimes, n_species)| {
        (
            proptest::collection::vec(0.1..1.0f64, n_regimes),
            proptest::collection::vec(
                proptest::collection::vec(0.0..10.0f64, n_species),
                n_regimes,
            ),
        )
            .prop_map(|(raw, services)| {
                let total: f64 = raw.iter().sum();
                RegimeScenario {
                    regimes: raw
                        .iter()
                        .zip(services)
                        .map(|(&p, service_by_species)| Regime {
                            probability: p / total,
                            service_by_species,
                        })
                        .collect(),
                }
            })
    })
}

/// Nested non-empty species subsets `small`, `mid`, `large` of `0..n`.
fn species_chain(n_species: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
    let perm = Just((0..n_species).collect::<Vec<usize>>()).prop_shuffle();
    (perm, 1..=n_species, 1..=n_species, 1..=n_species).prop_map(|(perm, a, b, c)| {
        let mut cuts = [a, b, c];
        cuts.sort_unstable();
        (
            perm[..cuts[0]].to_vec(),
            perm[..cuts[1]].to_vec(),
            perm[..cuts[2]].to_vec(),
        )
    })
}

/// A valid portfolio whose covariance is a Gram matrix `G'G` (symmetric
/// bitwise and positive semidefinite by construction).
fn portfolio_strategy() -> impl Strategy<Value = ServicePortfolio> {
    (2usize..6).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.05..1.0f64, n),
            proptest::collection::vec(-3.0..3.0f64, n),
            proptest::collection::vec(proptest::collection::vec(-2.0..2.0f64, n), n),
        )
            .prop_map(|(raw_weights, means, g)| {
                let n = raw_weights.len();
                let total: f64 = raw_weights.iter().sum();
                let mut covariance = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        covariance[i][j] = (0..n).map(|k| g[k][i] * g[k][j]).sum();
                    }
                }
                ServicePortfolio {
                    weights: raw_weights.iter().map(|w| w / total).collect(),
                    means,
                    covariance,
                }
            })
    })
}

fn buffer_strategy() -> impl Strategy<Value = BufferPoolSpec> {
    (
        0.5..200.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.01..=1.0f64,
        1u32..40,
    )
        .prop_map(
            |(issuance_per_period, buffer_fraction, reversal_probability, reversal_severity, horizon)| {
                BufferPoolSpec {
                    issuance_per_period,
                    buffer_fraction,
                    reversal_probability,
                    reversal_severity,
                    horizon,
                }
            },
        )
}

fn level(v: f64) -> BiodiversityLevel {
    BiodiversityLevel::new(v).unwrap()
}

proptest! {
    #[test]
    fn service_mean_rises_and_volatility_falls(s in scenario_strategy()) {
        // 1000-point grid over the bounds.
        let mut prev = s.service.moments(level(0.0));
        for i in 1..1000 {
            let v = 30.0 * i as f64 / 999.0;
            let m = s.service.moments(level(v));
            prop_assert!(m.mu > prev.mu);
            prop_assert!(m.sigma < prev.sigma);
            prop_assert!(m.sigma > 0.0);
            prop_assert!(m.mu < s.service.mu_max);
            prop_assert!(m.dmu > 0.0 && m.dsigma < 0.0);
            prev = m;
        }
    }

    #[test]
    fn moment_derivatives_match_central_differences(s in scenario_strategy()) {
        let h = 1e-5;
        for i in 0..100 {
            let v = 0.1 + 29.8 * i as f64 / 99.0;
            let m = s.service.moments(level(v));
            let hi = s.service.moments(level(v + h));
            let lo = s.service.moments(level(v - h));
            let fd_mu = (hi.mu - lo.mu) / (2.0 * h);
            let fd_sigma = (hi.sigma - lo.sigma) / (2.0 * h);
            // Relative 1e-6 plus a floor for the cancellation in sampling a
            // saturated curve at two nearby points (absolute error of the
            // difference is ~mu_max * eps / h regardless of the slope).
            prop_assert!(
                (fd_mu - m.dmu).abs() <= 1e-6 * m.dmu.abs() + 5e-10 * s.service.mu_max,
                "v={v}: {fd_mu} vs {}", m.dmu
            );
            prop_assert!(
                (fd_sigma - m.dsigma).abs() <= 1e-6 * m.dsigma.abs() + 5e-10 * s.service.sigma_0,
                "v={v}: {fd_sigma} vs {}", m.dsigma
            );
        }
    }

    #[test]
    fn risk_premium_is_non_negative_and_location_free(
        rho in 0.0..4.0f64,
        mean_a in -20.0..20.0f64,
        mean_b in -20.0..20.0f64,
        sd in 0.0..5.0f64,
    ) {
        let pref = RiskPreference { rho };
        let a = IncomeDistribution::new(mean_a, sd).unwrap();
        let b = IncomeDistribution::new(mean_b, sd).unwrap();
        let ra = valuation::risk_premium(&pref, &a);
        prop_assert!(ra >= 0.0);
        prop_assert_eq!(ra, valuation::risk_premium(&pref, &b));
        prop_assert!(valuation::certainty_equivalent(&pref, &a) <= mean_a);
    }

    #[test]
    fn risk_premium_is_quadratic_in_scale(
        rho in 0.0..4.0f64,
        mean in -20.0..20.0f64,
        sd in 0.0..5.0f64,
    ) {
        let pref = RiskPreference { rho };
        let base = valuation::risk_premium(&pref, &IncomeDistribution::new(mean, sd).unwrap());
        let doubled =
            valuation::risk_premium(&pref, &IncomeDistribution::new(mean, 2.0 * sd).unwrap());
        prop_assert_eq!(doubled, 4.0 * base);
    }

    #[test]
    fn insurance_value_is_positive_and_grows_with_risk_aversion(
        s in scenario_strategy(),
        v in 0.0..30.0f64,
        factor in 1.0..4.0f64,
    ) {
        let value = valuation::insurance_value(&s, level(v)).unwrap();
        prop_assert!(value > 0.0);
        let mut keener = s.clone();
        keener.preference.rho *= factor;
        let keener_value = valuation::insurance_value(&keener, level(v)).unwrap();
        prop_assert!(keener_value >= value);
    }

    #[test]
    fn optimal_coverage_beats_sampled_alternatives(
        s in scenario_strategy(),
        v in 0.0..30.0f64,
        lambda in 0.0..2.0f64,
        alpha in 0.0..=1.0f64,
    ) {
        let v = level(v);
        let best = optimize::optimal_coverage(&s, v, lambda).unwrap();
        prop_assert!((0.0..=1.0).contains(&best));
        let ce_at = |a: f64| common::raw_ce_insured(&s, v.value(), a, lambda);
        prop_assert!(ce_at(best) >= ce_at(alpha) - 1e-12);
        if lambda >= s.preference.rho * raw_sigma(&s, v.value()) {
            prop_assert_eq!(best, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimum_is_an_interior_local_max(s in scenario_strategy()) {
        let r = optimize::optimal_biodiversity(&s).unwrap();
        let v = r.v_star.value();
        prop_assert!(r.converged);
        prop_assert!(v > 0.0 && v < 30.0, "optimum unexpectedly on the boundary: {v}");
        prop_assert!(r.foc_residual.abs() <= 1e-8);
        prop_assert!(r.ce_star >= raw_ce(&s, v - 1e-3) - 1e-12);
        prop_assert!(r.ce_star >= raw_ce(&s, v + 1e-3) - 1e-12);
    }

    #[test]
    fn insurance_always_substitutes_for_biodiversity(
        s in scenario_strategy(),
        frac in 0.1..0.9f64,
    ) {
        let bare = optimize::optimal_biodiversity(&s).unwrap();
        let lambda = frac * s.preference.rho * raw_sigma(&s, bare.v_star.value());
        let joint = optimize::joint_optimum(&s, lambda).unwrap();
        prop_assert!(joint.alpha_star > 0.0);
        prop_assert!(joint.v_star < bare.v_star);
        prop_assert!(joint.ce_star >= bare.ce_star - 1e-12);
    }
}

proptest! {
    #[test]
    fn option_value_is_non_negative_and_monotone_in_retention(
        (scenario, chain) in regime_scenario_strategy().prop_flat_map(|rs| {
            let n = rs.regimes[0].service_by_species.len();
            (Just(rs), species_chain(n))
        })
    ) {
        let (reduced, mid, large) = chain;
        let ov_mid = option_value(&scenario, &mid, &reduced).unwrap();
        let ov_large = option_value(&scenario, &large, &reduced).unwrap();
        prop_assert!(ov_mid >= 0.0);
        prop_assert!(ov_large >= ov_mid - 1e-12);
    }

    #[test]
    fn diversification_benefit_is_non_negative_on_gram_covariances(
        p in portfolio_strategy()
    ) {
        let stats = portfolio_stats(&p).unwrap();
        prop_assert!(stats.diversification_benefit >= 0.0);
        prop_assert!(stats.variance >= -1e-12);
    }

    #[test]
    fn buffer_trials_conserve_credits(
        spec in buffer_strategy(),
        seed in any::<u64>(),
        trial in 0u64..512,
    ) {
        let outcome = simulate_trial(&spec, &mut Substreams::new(seed, 0).stream(trial));
        let total =
            outcome.net_credits + outcome.terminal_buffer + outcome.absorbed + outcome.deficit;
        prop_assert!((total - outcome.issued).abs() <= 1e-9 * outcome.issued.max(1.0));
    }

    #[test]
    fn sampling_reproduces_bit_for_bit(
        s in scenario_strategy(),
        v in 0.0..30.0f64,
        n in 1u64..3000,
        seed in any::<u64>(),
        stream_id in any::<u64>(),
    ) {
        let cfg = SamplerConfig { n_samples: n, seed, stream_id };
        let a = sample_service(&s, level(v), &cfg).unwrap();
        let b = sample_service(&s, level(v), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn regime_delta_is_exactly_antisymmetric(
        a in scenario_strategy(),
        b in scenario_strategy(),
    ) {
        prop_assert_eq!(regime_delta(&a, &a).unwrap(), 0.0);
        let ab = regime_delta(&a, &b).unwrap();
        let ba = regime_delta(&b, &a).unwrap();
        prop_assert_eq!(ab, -ba);
    }
}
