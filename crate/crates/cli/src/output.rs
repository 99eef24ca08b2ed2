//! Deterministic report emission. JSON uses shortest round-trip float
//! encoding; CSV carries 12 significant digits. Nothing non-finite is
//! allowed to reach either format.

use clap::ValueEnum;
use serde::Serialize;

use crate::commands::CliError;

/// Output encoding selected with `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Formats one CSV float to 12 significant digits, rejecting non-finite
/// values before they can be written.
pub fn csv_number(x: f64) -> Result<String, CliError> {
    if !x.is_finite() {
        return Err(CliError::numeric(format!(
            "cannot emit non-finite value {x} in a report"
        )));
    }
    if x == 0.0 {
        return Ok("0".to_string());
    }
    Ok(format!("{x:.11e}"))
}

/// Joins one CSV row, terminating it with a newline.
pub fn csv_row(fields: &[String]) -> String {
    let mut row = fields.join(",");
    row.push('\n');
    row
}

/// Serializes a payload to pretty JSON after checking that every number in
/// it is finite. Non-finite floats serialize as JSON null, so a null
/// anywhere in the tree is also treated as a numeric failure: no report
/// schema here emits null on purpose.
pub fn to_pretty_json<T: Serialize>(payload: &T) -> Result<String, CliError> {
    let value = serde_json::to_value(payload)
        .map_err(|e| CliError::numeric(format!("cannot serialize report: {e}")))?;
    ensure_finite(&value)?;
    let mut text = serde_json::to_string_pretty(payload)
        .map_err(|e| CliError::numeric(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn ensure_finite(value: &serde_json::Value) -> Result<(), CliError> {
    match value {
        serde_json::Value::Null => Err(CliError::numeric(
            "report contains a non-finite number".to_string(),
        )),
        serde_json::Value::Number(n) => {
            if n.as_f64().is_some_and(|x| !x.is_finite()) {
                Err(CliError::numeric(
                    "report contains a non-finite number".to_string(),
                ))
            } else {
                Ok(())
            }
        }
        serde_json::Value::Array(items) => items.iter().try_for_each(ensure_finite),
        serde_json::Value::Object(map) => map.values().try_for_each(ensure_finite),
        _ => Ok(()),
    }
}
