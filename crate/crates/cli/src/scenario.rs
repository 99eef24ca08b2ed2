//! Scenario-file schema: the core model document plus optional sections
//! consumed by the stochastic and resilience commands.

use std::path::Path;

use natcap_core::model::{
    CostModel, InsuranceMarket, RiskPreference, ScenarioSpec, ServiceModel, VBounds,
};
use natcap_core::montecarlo::BufferPoolSpec;
use natcap_core::resilience::ResilienceInputs;
use serde::Deserialize;

use crate::commands::CliError;

/// One scenario JSON document. The core fields mirror the engine's
/// scenario type; `buffer` and `resilience` are only required by the
/// commands that use them.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub service: ServiceModel,
    pub cost: CostModel,
    pub preference: RiskPreference,
    #[serde(default)]
    pub market: Option<InsuranceMarket>,
    pub v_bounds: VBounds,
    /// Buffer-pool program simulated by `simulate`.
    #[serde(default)]
    pub buffer: Option<BufferPoolSpec>,
    /// Component inputs consumed by `resilience`.
    #[serde(default)]
    pub resilience: Option<ResilienceInputs>,
}

impl ScenarioFile {
    /// Reads and parses `path`, then validates the core scenario so every
    /// later command starts from checked inputs. Parse and validation
    /// problems name the offending field.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read {}: {e}", path.display()))
        })?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| {
            CliError::validation(format!("invalid scenario {}: {e}", path.display()))
        })?;
        file.scenario().validate()?;
        Ok(file)
    }

    /// The core scenario the engine consumes.
    pub fn scenario(&self) -> ScenarioSpec {
        ScenarioSpec {
            service: self.service,
            cost: self.cost,
            preference: self.preference,
            market: self.market,
            v_bounds: self.v_bounds,
        }
    }
}
