//! Scenario and category-rule files (TOML).
//!
//! A scenario file holds any subset of the [`ScenarioConfig`] keys; missing
//! keys take their defaults. Unknown keys are rejected.
//!
//! ```toml
//! scenario_id = "reference"
//! sites_per_zone = 2
//! hosts_per_site = 7
//! poll_timeout_ms = 1
//!
//! [post_start_sleep]
//! name_server = 5.0
//! global_controller = 5.0
//! hosts = 5.0
//! ```
//!
//! A rule file lists `[[rule]]` tables, first match wins:
//!
//! ```toml
//! [[rule]]
//! pattern = "*poll*"
//! category = "IoWaitPoll"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use adnprof_core::analysis::{CategoryRule, CategoryRules};
use adnprof_core::control::{ConfigError, ScenarioConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
}

fn read(path: &Path) -> Result<String, ConfigFileError> {
    fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.into(),
        source,
    })
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigFileError> {
    let cfg = parse_scenario(&read(path)?).map_err(|message| ConfigFileError::Parse {
        path: path.into(),
        message,
    })?;
    cfg.validate().map_err(|source| ConfigFileError::Invalid {
        path: path.into(),
        source,
    })?;
    Ok(cfg)
}

pub fn scenario_to_toml(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).unwrap_or_default()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    #[serde(default)]
    rule: Vec<CategoryRule>,
}

pub fn parse_rules(text: &str) -> Result<CategoryRules, String> {
    let f: RulesFile = toml::from_str(text).map_err(|e| e.to_string())?;
    Ok(CategoryRules::new(f.rule))
}

pub fn load_rules(path: &Path) -> Result<CategoryRules, ConfigFileError> {
    parse_rules(&read(path)?).map_err(|message| ConfigFileError::Parse {
        path: path.into(),
        message,
    })
}

pub fn rules_to_toml(rules: &CategoryRules) -> String {
    toml::to_string(&RulesFile {
        rule: rules.rules.clone(),
    })
    .unwrap_or_default()
}
