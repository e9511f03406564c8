//! Scenario files, experiment runs and output formats for the `swipt`
//! command-line tool.

pub mod checks;
pub mod config;
pub mod experiment;

pub use config::{load_config, ScenarioConfig};
pub use experiment::{run_experiment, ExperimentReport};
