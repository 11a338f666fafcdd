// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario runner behind the `eitlab` command.

pub mod config;
pub mod error;
pub mod scenario;
pub mod svg;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::{Mode, Overrides, ScenarioConfig};
pub use error::CliError;
pub use scenario::run_scenario;
pub use table::{Cell, Table};

/// Loads the configuration, runs the scenario and writes every output file.
pub fn run(config_path: Option<&Path>, mode: Mode, overrides: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let config = ScenarioConfig::load(config_path, mode, overrides)?;
    let tables = run_scenario(&config)?;
    table::write_outputs(&config, &tables)
}
