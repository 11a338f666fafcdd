// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Core algorithms for continuous momentum readout and direct feedback
//! cooling of a trapped ion driven in a Λ configuration.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: truncated oscillator and three-level operator algebra,
//!   recoil kernels and the dipole angular quadrature.
//! * [`lambda`]: closed-form internal-state analytics (susceptibility,
//!   dressed states, sideband response `I(ν)`, rate sets).
//! * [`full_model`]: the un-eliminated atom ⊗ motion master equation.
//! * [`reduced`]: the adiabatically eliminated motional dynamics.
//! * [`feedback`]: direct feedback, feedback master equations and
//!   steady-state results.
//! * [`sde`]: Wiener increments, ensembles and weak-convergence tools.

pub mod banded;
pub mod elimination;
pub mod error;
pub mod feedback;
pub mod full_model;
pub mod hilbert;
pub mod lambda;
pub mod ode;
pub mod optimize;
pub mod reduced;
pub mod sde;
pub mod superop;

pub use error::{Error, Result};
pub use feedback::{FeedbackParams, SteadyMethod, SteadyStateReport};
pub use full_model::{FullModel, FullState, TrapParams};
pub use hilbert::{AngularQuadrature, FockOperator, FockSpace, OperatorTag, ShiftMode};
pub use lambda::{AtomParams, DerivedAtom, RateSet};
pub use reduced::{MeasurementParams, ReducedModel, ReducedState};
pub use sde::{EnsembleSpec, NoiseStream};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
