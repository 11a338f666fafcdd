// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Benchmark fixtures shared by the criterion targets.

use eitlab_core::{FockSpace, ReducedModel, TrapParams};

/// Reduced model with trap frequency 1 and `n` Fock levels.
pub fn model(n: usize) -> ReducedModel {
    ReducedModel::new(&TrapParams::new(1.0, FockSpace::new(n).expect("cutoff")).expect("trap"))
}
