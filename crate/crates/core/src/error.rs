// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A physical or numerical parameter is outside its admissible domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// Population leaked into the top levels of the truncated Fock space.
    #[error(
        "Fock cutoff {cutoff} too small: edge-band population {population:.3e} exceeds {threshold:.1e}"
    )]
    Cutoff {
        cutoff: usize,
        population: f64,
        threshold: f64,
    },

    /// A stochastic step moved the trace too far from one before renormalisation.
    #[error("step size too large: trace deviated by {deviation:.3e} before renormalisation")]
    StepSize { deviation: f64 },

    /// Net damping is not positive, so the occupation grows without bound.
    #[error("no steady state: net damping W = {damping:.6e} is not positive")]
    NoSteadyState { damping: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("operator invariant violated: {0}")]
    Invariant(String),

    /// Wraps a failure inside one trajectory of an ensemble, with replay data.
    #[error("trajectory {index} failed at noise position {position}: {source}")]
    Trajectory {
        index: u64,
        position: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for the runtime numerical guards (cutoff, step size, singular solves).
    pub fn is_numerical_guard(&self) -> bool {
        match self {
            Error::Cutoff { .. } | Error::StepSize { .. } | Error::Singular(_) => true,
            Error::Trajectory { source, .. } => source.is_numerical_guard(),
            _ => false,
        }
    }
}
