//! Scenario loading, analyses and artifact output for the `robustinfo`
//! command-line tool.

pub mod error;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{run, run_in_memory, RunOptions, RunReport};
pub use scenario::{load_scenario, parse_scenario, Mode, ScenarioConfig};
