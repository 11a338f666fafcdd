// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON, wrong types or unknown keys.
    #[error("config schema error at `{path}`: {message}")]
    Syntax { path: String, message: String },

    /// Well-formed but physically inadmissible configuration.
    #[error("config physics error in `{field}`: {message}")]
    Physics { field: String, message: String },

    /// Failure inside a library module while running a scenario.
    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: eitlab_core::Error,
    },

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Core error raised while checking configuration section `section`.
    pub fn from_core_in(section: &str, e: eitlab_core::Error) -> Self {
        match e {
            eitlab_core::Error::InvalidParameter { name, reason } => {
                let field = if name.contains('.') {
                    name
                } else {
                    format!("{section}.{name}")
                };
                CliError::Physics {
                    field,
                    message: reason,
                }
            }
            other => CliError::Module {
                module: "config",
                source: other,
            },
        }
    }

    pub fn module(module: &'static str) -> impl Fn(eitlab_core::Error) -> CliError {
        move |source| CliError::Module { module, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax { .. } => 2,
            CliError::Physics { .. } => 3,
            CliError::Module { source, .. } => match source {
                eitlab_core::Error::InvalidParameter { .. } => 3,
                e if e.is_numerical_guard() => 4,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Output(_) => 1,
        }
    }
}
