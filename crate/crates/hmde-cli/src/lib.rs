//! Batch front door for the hmde toolkit: TOML scenario configs in, CSV
//! tables and plain-text reports out. The binary (`hmde`) wraps
//! [`config::validate_config`], [`scenario::run_scenario`], and the built-in
//! [`catalog`].

pub mod catalog;
pub mod config;
pub mod scenario;

pub use config::{dump_config, validate_config, ConfigError, ParamValue, Scenario, ScenarioKind};
pub use scenario::{run_scenario, Manifest, RunError};
