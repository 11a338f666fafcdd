// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Cross-check of the adiabatically eliminated motion against the full
//! three-level model.

use serde::Serialize;

use crate::error::Result;
use crate::full_model::{Direction, FullModel, FullState, TrapParams};
use crate::hilbert::{expect, AngularQuadrature};
use crate::lambda::{dressed_states, AtomParams};
use crate::ode::{evolve_checkpoints, rk4_closure, step_count};
use crate::reduced::{MeasurementParams, ReducedModel};
use crate::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EliminationSample {
    pub t: f64,
    /// `⟨p̂²⟩` of the full model, traced over the internal state.
    pub full: f64,
    pub reduced: f64,
}

impl EliminationSample {
    pub fn relative_deviation(&self) -> f64 {
        (self.full - self.reduced).abs() / self.full.abs()
    }
}

/// `⟨p̂²⟩(t)` from the full model started in `|D⟩⟨D| ⊗ μ₀` (moving frame) and
/// from the reduced unconditioned equation started in `μ₀`.
pub fn compare_elimination(
    atom: &AtomParams,
    trap: &TrapParams,
    quad: &AngularQuadrature,
    motion: &CMat,
    times: &[f64],
) -> Result<Vec<EliminationSample>> {
    let d = dressed_states(atom, trap.nu)?;
    let dark = d.dark.map(|x| C64::new(x, 0.0));
    let full = FullModel::with_quadrature(*atom, trap.clone(), quad)?;
    let start = full.transform_u(&FullState::product(&(dark * dark.transpose()), motion)?, Direction::Forward);
    let h = full.max_step();
    let lab = evolve_checkpoints(full.liouvillian(), start.matrix(), times, h);

    let reduced = ReducedModel::new(trap);
    let unraveling = reduced.general(atom, &MeasurementParams::new(1.0, 0.0)?, quad, true)?;
    let p2 = reduced.ops().p.matrix() * reduced.ops().p.matrix();

    let mut out = Vec::with_capacity(times.len());
    let mut mu = motion.clone();
    let mut t = 0.0;
    for (&target, rho) in times.iter().zip(&lab) {
        let span = target - t;
        if span > 0.0 {
            let steps = step_count(span, h);
            let step = span / steps as f64;
            for _ in 0..steps {
                mu = rk4_closure(|m| unraveling.mean_apply(m), &mu, step);
            }
        }
        t = target.max(t);
        let moving = full.transform_u(&FullState::new(rho.clone(), trap.space.dim())?, Direction::Inverse);
        trap.space.guard_product(moving.matrix(), 3)?;
        out.push(EliminationSample {
            t: target,
            full: expect(&p2, &moving.motional()).re,
            reduced: expect(&p2, &mu).re,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_density, FockSpace};

    #[test]
    fn starts_from_the_same_state() {
        let atom = AtomParams {
            gamma: 2.0,
            gamma_g: 2.0,
            gamma_r: 0.0,
            omega_l: 4.0,
            g: 0.2,
            delta_p: 0.0,
            delta_l: 0.0,
            eta_g: 0.05,
            eta_r: -0.05,
        };
        let trap = TrapParams::new(1.0, FockSpace::new(8).unwrap()).unwrap();
        let mu = coherent_density(8, C64::new(0.5, 0.0));
        let s = compare_elimination(&atom, &trap, &AngularQuadrature::default(), &mu, &[0.0, 0.1]).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[0].full - s[0].reduced).abs() < 1e-10);
        assert!(s[1].relative_deviation() < 0.05);
    }
}
