//! Command execution. A parsed invocation becomes a [`RunManifest`]; [`run`]
//! turns the manifest into the complete report text, so every run is a pure
//! function of its manifest and the scenario file it names.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use natcap_core::model::BiodiversityLevel;
use natcap_core::montecarlo::{self, SamplerConfig};
use natcap_core::optimize::{self, OptimizationResult};
use natcap_core::resilience;
use natcap_core::valuation;
use serde::Serialize;

use crate::output::{csv_number, csv_row, to_pretty_json, Format};
use crate::scenario::ScenarioFile;

/// How a failed run terminates: invalid input exits 1, numerical failure
/// exits 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation,
    Numeric,
}

/// A run failure carrying its exit class and a user-facing message.
#[derive(Debug, Clone)]
pub struct CliError {
    kind: ExitKind,
    message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        CliError {
            kind: ExitKind::Validation,
            message,
        }
    }

    pub fn numeric(message: String) -> Self {
        CliError {
            kind: ExitKind::Numeric,
            message,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ExitKind::Validation => 1,
            ExitKind::Numeric => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<natcap_core::Error> for CliError {
    fn from(e: natcap_core::Error) -> Self {
        match e {
            natcap_core::Error::NoConvergence { .. } | natcap_core::Error::NonFinite { .. } => {
                CliError::numeric(e.to_string())
            }
            _ => CliError::validation(e.to_string()),
        }
    }
}

/// Evaluation grid `lo:hi:steps`, where `steps` counts grid points
/// (so `0:10:11` evaluates at 0, 1, ..., 10).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: u32,
}

impl GridSpec {
    /// The evaluation points, inclusive of both endpoints.
    pub fn points(&self) -> Vec<f64> {
        let n = self.steps as usize;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        const USAGE: &str = "expected lo:hi:steps with finite lo < hi and steps >= 2";
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(USAGE.to_string());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| USAGE.to_string())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| USAGE.to_string())?;
        let steps: u32 = parts[2].trim().parse().map_err(|_| USAGE.to_string())?;
        if !lo.is_finite() || !hi.is_finite() || lo >= hi || steps < 2 {
            return Err(USAGE.to_string());
        }
        Ok(GridSpec { lo, hi, steps })
    }
}

/// Which report a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Value,
    Optimize,
    Simulate,
    Resilience,
}

/// Everything one invocation resolved from flags and defaults. Two runs
/// with equal manifests (and an unchanged scenario file) produce
/// byte-identical reports.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: CommandKind,
    pub scenario_path: PathBuf,
    pub seed: u64,
    pub output_format: Format,
    /// `value` only; defaults to the scenario bounds with 101 points.
    pub grid: Option<GridSpec>,
    /// `optimize` only; falls back to the scenario's market load.
    pub lambdas: Vec<f64>,
    /// `simulate` only.
    pub trials: u64,
    /// `simulate` only; overrides the scenario's buffer horizon.
    pub horizon: Option<u32>,
    /// `simulate` only; per-period trajectory CSV destination.
    pub trajectories: Option<PathBuf>,
}

/// Executes the manifest and returns the full stdout payload.
pub fn run(manifest: &RunManifest) -> Result<String, CliError> {
    let file = ScenarioFile::load(&manifest.scenario_path)?;
    match manifest.command {
        CommandKind::Value => run_value(manifest, &file),
        CommandKind::Optimize => run_optimize(manifest, &file),
        CommandKind::Simulate => run_simulate(manifest, &file),
        CommandKind::Resilience => run_resilience(manifest, &file),
    }
}

fn run_value(manifest: &RunManifest, file: &ScenarioFile) -> Result<String, CliError> {
    let scenario = file.scenario();
    let grid = manifest.grid.unwrap_or(GridSpec {
        lo: scenario.v_bounds.lo(),
        hi: scenario.v_bounds.hi(),
        steps: 101,
    });

    let mut results = Vec::with_capacity(grid.steps as usize);
    for point in grid.points() {
        let v = BiodiversityLevel::new(point)?;
        results.push(valuation::evaluate(&scenario, v)?);
    }

    match manifest.output_format {
        Format::Json => to_pretty_json(&results),
        Format::Csv => {
            let mut out = String::from(
                "v,mu,sigma,cost,risk_premium,certainty_equivalent,insurance_value,insurance_value_fd\n",
            );
            for r in &results {
                let moments = scenario.service.moments(r.v);
                let cost = scenario.cost.eval(r.v);
                out.push_str(&csv_row(&[
                    csv_number(r.v.value())?,
                    csv_number(moments.mu)?,
                    csv_number(moments.sigma)?,
                    csv_number(cost.cost)?,
                    csv_number(r.risk_premium)?,
                    csv_number(r.certainty_equivalent)?,
                    csv_number(r.insurance_value)?,
                    csv_number(r.insurance_value_fd)?,
                ]));
            }
            Ok(out)
        }
    }
}

/// One optimize row: the joint solve for a single market load next to its
/// certainty-equivalent gain over staying uninsured.
#[derive(Debug, Serialize)]
struct JointEntry {
    lambda: f64,
    ce_gain: f64,
    result: OptimizationResult,
}

#[derive(Debug, Serialize)]
struct OptimizeReport {
    no_insurance: OptimizationResult,
    joint: Vec<JointEntry>,
}

fn require_converged(result: &OptimizationResult) -> Result<(), CliError> {
    if result.converged {
        Ok(())
    } else {
        Err(CliError::numeric(format!(
            "optimizer failed to converge after {} iterations (residual {:e})",
            result.iterations, result.foc_residual
        )))
    }
}

fn run_optimize(manifest: &RunManifest, file: &ScenarioFile) -> Result<String, CliError> {
    let scenario = file.scenario();
    let lambdas: Vec<f64> = if manifest.lambdas.is_empty() {
        match scenario.market_lambda() {
            Some(lambda) => vec![lambda],
            None => {
                return Err(CliError::validation(
                    "optimize needs a market load: pass --lambda or give the scenario a \
                     \"market\" section"
                        .to_string(),
                ))
            }
        }
    } else {
        manifest.lambdas.clone()
    };

    let no_insurance = optimize::optimal_biodiversity(&scenario)?;
    require_converged(&no_insurance)?;

    let mut joint = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let result = optimize::joint_optimum(&scenario, lambda)?;
        require_converged(&result)?;
        joint.push(JointEntry {
            lambda,
            ce_gain: result.ce_star - no_insurance.ce_star,
            result,
        });
    }

    let report = OptimizeReport {
        no_insurance,
        joint,
    };
    match manifest.output_format {
        Format::Json => to_pretty_json(&report),
        Format::Csv => {
            let mut out =
                String::from("lambda,v_star_noins,v_star_joint,alpha_star,ce_gain\n");
            for entry in &report.joint {
                out.push_str(&csv_row(&[
                    csv_number(entry.lambda)?,
                    csv_number(report.no_insurance.v_star.value())?,
                    csv_number(entry.result.v_star.value())?,
                    csv_number(entry.result.alpha_star)?,
                    csv_number(entry.ce_gain)?,
                ]));
            }
            Ok(out)
        }
    }
}

fn run_simulate(manifest: &RunManifest, file: &ScenarioFile) -> Result<String, CliError> {
    let mut spec = file.buffer.ok_or_else(|| {
        CliError::validation(
            "simulate needs a \"buffer\" section in the scenario file".to_string(),
        )
    })?;
    if let Some(horizon) = manifest.horizon {
        spec.horizon = horizon;
    }

    let cfg = SamplerConfig {
        n_samples: manifest.trials,
        seed: manifest.seed,
        stream_id: 0,
    };
    let summary = montecarlo::simulate_buffer_pool(&spec, manifest.trials, &cfg)?;

    if let Some(path) = &manifest.trajectories {
        let paths = montecarlo::buffer_pool_trajectories(&spec, manifest.trials, &cfg)?;
        let mut text = String::from("trial,period,issued,buffer,reversal,deficit\n");
        for (t, path_records) in paths.iter().enumerate() {
            for record in path_records {
                text.push_str(&csv_row(&[
                    (t as u64 + 1).to_string(),
                    record.period.to_string(),
                    csv_number(record.issued)?,
                    csv_number(record.buffer)?,
                    csv_number(record.reversal)?,
                    csv_number(record.deficit)?,
                ]));
            }
        }
        std::fs::write(path, text).map_err(|e| {
            CliError::validation(format!("cannot write {}: {e}", path.display()))
        })?;
    }

    match manifest.output_format {
        Format::Json => to_pretty_json(&summary),
        Format::Csv => {
            let mut out = String::from(
                "shortfall_probability,expected_terminal_buffer,expected_net_credits,trials,stderr_shortfall\n",
            );
            out.push_str(&csv_row(&[
                csv_number(summary.shortfall_probability)?,
                csv_number(summary.expected_terminal_buffer)?,
                csv_number(summary.expected_net_credits)?,
                summary.trials.to_string(),
                csv_number(summary.stderr_shortfall)?,
            ]));
            Ok(out)
        }
    }
}

fn run_resilience(manifest: &RunManifest, file: &ScenarioFile) -> Result<String, CliError> {
    let inputs = file.resilience.as_ref().ok_or_else(|| {
        CliError::validation(
            "resilience needs a \"resilience\" section in the scenario file".to_string(),
        )
    })?;
    let report = resilience::resilience_report(&file.scenario(), inputs)?;

    match manifest.output_format {
        Format::Json => to_pretty_json(&report),
        Format::Csv => {
            let mut out = String::from(
                "component_a_insurance_value,component_b_avoided_damage,component_c_option_value,component_c_diversification,component_d_practice_value,regime_delta_ce\n",
            );
            out.push_str(&csv_row(&[
                csv_number(report.component_a_insurance_value)?,
                csv_number(report.component_b_avoided_damage)?,
                csv_number(report.component_c_option_value)?,
                csv_number(report.component_c_diversification)?,
                csv_number(report.component_d_practice_value)?,
                csv_number(report.regime_delta_ce)?,
            ]));
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses_and_lists_inclusive_points() {
        let grid: GridSpec = "0:10:11".parse().unwrap();
        assert_eq!(
            grid,
            GridSpec {
                lo: 0.0,
                hi: 10.0,
                steps: 11
            }
        );
        let points = grid.points();
        assert_eq!(points.len(), 11);
        assert_eq!(points[0], 0.0);
        assert_eq!(points[3], 3.0);
        assert_eq!(points[10], 10.0);
    }

    #[test]
    fn grid_spec_endpoints_are_exact_even_when_steps_do_not_divide() {
        let grid: GridSpec = "0.1:29.9:7".parse().unwrap();
        let points = grid.points();
        assert_eq!(points[0], 0.1);
        assert_eq!(points[6], 29.9);
        assert!(points.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_spec_rejects_malformed_input() {
        for bad in [
            "0:10", "0:10:1", "10:0:5", "a:10:5", "0:inf:5", "0:10:5:9", "",
        ] {
            assert!(bad.parse::<GridSpec>().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn core_errors_map_to_the_documented_exit_codes() {
        let invalid: CliError = natcap_core::Error::invalid("service.mu_max", "must be > 0").into();
        assert_eq!(invalid.exit_code(), 1);

        let no_convergence: CliError = natcap_core::Error::NoConvergence {
            iterations: 200,
            residual: 1e-3,
        }
        .into();
        assert_eq!(no_convergence.exit_code(), 2);

        let non_finite: CliError = natcap_core::Error::NonFinite {
            context: "certainty equivalent".to_string(),
        }
        .into();
        assert_eq!(non_finite.exit_code(), 2);
    }
}
