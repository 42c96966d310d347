//! Configuration, scenario runner and artifact inspection behind the `mimofb` binary.

pub mod config;
pub mod describe;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, Scenario, SMOKE_PRESET};
pub use error::{CliError, CliResult};
pub use run::{RunOutput, Runner};
