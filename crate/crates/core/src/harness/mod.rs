//! Scenario files, the runner behind `rml run`, the `reduce` command and plots.

pub mod config;
pub mod reduce;
pub mod runner;
pub mod svg;

pub use config::{parse_grid_list, Field, ProblemKind, Scenario};
pub use reduce::{reduce_command, ReduceMode};
pub use runner::{
    default_out_root, execute, run_scenario, run_scenario_file, write_artifacts, Check, RunArgs,
    RunRecord, ScenarioOutcome, EXIT_EXPECTATION, EXIT_OK, EXIT_PARSE, EXIT_SOLVER,
};
