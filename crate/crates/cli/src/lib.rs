//! Batch front-end for the two-layer thin-film solver: scenario files in,
//! CSV artifacts and exit codes out.

pub mod output;
pub mod runner;
pub mod scenario;

pub use runner::{run, EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, EXIT_RUPTURE, EXIT_STEP_FAILURE};
pub use scenario::{parse_scenario, parse_scenario_str, Mode, Scenario, ScenarioError};
