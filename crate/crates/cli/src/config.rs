//! Scenario configuration files.
//!
//! The file is TOML with the [`ScenarioConfig`] field names as top-level
//! keys. Absent keys keep their defaults, unknown keys are rejected.
//!
//! ```toml
//! n = 32
//! group_size = 4
//! seed = 42
//! trials = 50
//! ```

use bdris_core::{Error as CoreError, ScenarioConfig};

use crate::CliError;

pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let config: ScenarioConfig =
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
    validate(&config)?;
    Ok(config)
}

/// Validation with diagnostics phrased in terms of configuration keys.
pub fn validate(config: &ScenarioConfig) -> Result<(), CliError> {
    config.validate().map_err(|e| match e {
        CoreError::GroupSize { n, group_size } => {
            CliError::Config(format!("`group_size` = {group_size} must divide `n` = {n}"))
        }
        CoreError::InvalidConfig { key, reason } => CliError::Config(format!("`{key}` {reason}")),
        other => CliError::Config(other.to_string()),
    })
}
