//! Flag/config-file merging. Config files are flat JSON objects with the same
//! keys as the subcommand's flags; a flag given on the command line wins.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub fn load(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::BadFlag(format!("--config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::BadFlag(format!("--config {}: expected a JSON object", path.display()))),
        Err(e) => Err(CliError::BadFlag(format!("--config {}: {e}", path.display()))),
    }
}

/// Fills flags left unset from `config`. Keys the subcommand does not know
/// are rejected.
pub fn merge<A: Serialize + DeserializeOwned>(flags: &A, config: Option<&Map<String, Value>>) -> Result<A, CliError> {
    let Some(config) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("flag structs serialise")).expect("round trip"));
    };
    let Value::Object(mut obj) = serde_json::to_value(flags).expect("flag structs serialise") else {
        unreachable!("flag structs are objects")
    };
    for (k, v) in config {
        match obj.get_mut(k) {
            None => return Err(CliError::BadFlag(format!("unknown config key '{k}'"))),
            Some(slot) if slot.is_null() => *slot = v.clone(),
            Some(_) => {}
        }
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::BadFlag(format!("config value: {e}")))
}
