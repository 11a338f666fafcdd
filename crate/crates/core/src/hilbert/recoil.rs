// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Photon-recoil kernels `exp(i η s ẑ)` and their average over the dipole
//! emission pattern.
//!
//! Every kernel is diagonal in the eigenbasis of the truncated `ẑ`, so the
//! angular average `Σ_k w_k N(u_k) K(u_k) ρ K†(u_k)` acts on `ρ` expressed in
//! that basis as an element-wise (Hadamard) multiplier. [`RecoilMap`] caches
//! the multiplier; applying it costs four matrix products regardless of the
//! quadrature order.

use super::{AngularQuadrature, FockOperator, FockSpace, OperatorTag};
use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Which momentum shift the emitted photon imparts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// Kick `u − 1`: emission at angle `arccos u` after absorbing a probe photon
    /// (the frame of the eliminated model).
    Full,
    /// Kick `u`: emission only (the lab-frame recycling of the full model).
    Symmetric,
}

impl ShiftMode {
    fn shift(self, u: f64) -> f64 {
        match self {
            ShiftMode::Full => u - 1.0,
            ShiftMode::Symmetric => u,
        }
    }
}

/// `exp(i η s ẑ)` from the cached spectral decomposition of `ẑ`.
pub fn recoil_kernel(space: &FockSpace, eta: f64, s: f64) -> FockOperator {
    let spec = space.z_spectrum();
    let n = space.dim();
    let phases: Vec<C64> = spec
        .values
        .iter()
        .map(|&x| C64::from_polar(1.0, eta * s * x))
        .collect();
    let mut scaled = spec.vectors_c.clone();
    for (j, ph) in phases.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    let u = scaled * spec.vectors_c.transpose();
    FockOperator::new(u, OperatorTag::Unitary).expect("exponential of a Hermitian generator")
}

/// Averaged recoil map `ρ ↦ Σ_k w_k N(u_k) K_k ρ K_k†` with
/// `K_k = exp(−i η s(u_k) ẑ)`, possibly scaled by a branching weight.
#[derive(Debug, Clone)]
pub struct RecoilMap {
    space: FockSpace,
    multiplier: CMat,
}

impl RecoilMap {
    pub fn new(
        space: &FockSpace,
        quad: &AngularQuadrature,
        eta: f64,
        mode: ShiftMode,
    ) -> Result<Self> {
        if quad.order() < 4 {
            return Err(Error::invalid(
                "quadrature_order",
                format!("angular averages need order >= 4, got {}", quad.order()),
            ));
        }
        let values = &space.z_spectrum().values;
        let n = space.dim();
        let nodes: Vec<(f64, f64)> = quad
            .weighted_nodes()
            .map(|(u, w)| (mode.shift(u), w))
            .collect();
        let multiplier = CMat::from_fn(n, n, |i, j| {
            let d = values[i] - values[j];
            nodes
                .iter()
                .map(|&(s, w)| C64::from_polar(w, -eta * s * d))
                .sum()
        });
        Ok(RecoilMap {
            space: space.clone(),
            multiplier,
        })
    }

    /// Map defined directly by its multiplier in the `ẑ` eigenbasis.
    pub fn from_multiplier(space: &FockSpace, multiplier: CMat) -> Self {
        RecoilMap {
            space: space.clone(),
            multiplier,
        }
    }

    pub fn multiplier(&self) -> &CMat {
        &self.multiplier
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    /// The map scaled by a constant weight.
    pub fn scaled(&self, weight: f64) -> RecoilMap {
        RecoilMap {
            space: self.space.clone(),
            multiplier: &self.multiplier * C64::new(weight, 0.0),
        }
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        let v = &self.space.z_spectrum().vectors_c;
        let mut xz = v.transpose() * x * v;
        xz.component_mul_assign(&self.multiplier);
        v * xz * v.transpose()
    }
}

/// Angular average of `rho` over the dipole pattern with recoil strength `eta`.
pub fn angular_average(
    space: &FockSpace,
    quad: &AngularQuadrature,
    eta: f64,
    rho: &FockOperator,
    mode: ShiftMode,
) -> Result<FockOperator> {
    let tag = rho.tag();
    if !matches!(tag, OperatorTag::Density | OperatorTag::Hermitian) {
        return Err(Error::invalid(
            "rho",
            "angular average needs a density or Hermitian operator",
        ));
    }
    let map = RecoilMap::new(space, quad, eta, mode)?;
    let out = map.apply(rho.matrix());
    match tag {
        OperatorTag::Density => FockOperator::density(out),
        _ => Ok(FockOperator::hermitian(out)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{
        coherent_density, expect, fock_density, hermitize, ladder_ops, max_abs_diff,
        thermal_density,
    };

    #[test]
    fn zero_phase_kernel_is_identity() {
        let space = FockSpace::new(20).unwrap();
        let u = recoil_kernel(&space, 0.0, 1.3);
        assert!(max_abs_diff(u.matrix(), &CMat::identity(20, 20)) < 1e-12);
    }

    #[test]
    fn kernel_unitary_and_ground_overlap() {
        let space = FockSpace::new(40).unwrap();
        let u = recoil_kernel(&space, 0.1, -2.0);
        assert!(u.validate().is_ok());
        // ⟨0|exp(iθẑ)|0⟩ = exp(−θ²/4) for the oscillator ground state
        let want = (-(0.1f64 * 2.0).powi(2) / 4.0).exp();
        assert!((u.matrix()[(0, 0)] - C64::new(want, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn opposite_kernels_cancel() {
        let space = FockSpace::new(30).unwrap();
        let a = recoil_kernel(&space, 0.37, 1.1);
        let b = recoil_kernel(&space, 0.37, -1.1);
        assert!(max_abs_diff(&(a.matrix() * b.matrix()), &CMat::identity(30, 30)) < 1e-10);
    }

    #[test]
    fn zero_eta_average_is_identity_map() {
        let space = FockSpace::new(15).unwrap();
        let quad = AngularQuadrature::default();
        let rho = FockOperator::density(coherent_density(15, C64::new(0.5, 0.2))).unwrap();
        for mode in [ShiftMode::Full, ShiftMode::Symmetric] {
            let out = angular_average(&space, &quad, 0.0, &rho, mode).unwrap();
            assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-12);
        }
    }

    #[test]
    fn multiplier_matches_explicit_kernel_sum() {
        let space = FockSpace::new(18).unwrap();
        let quad = AngularQuadrature::new(12).unwrap();
        let rho = coherent_density(18, C64::new(0.8, -0.4));
        let eta = 0.45;
        for mode in [ShiftMode::Full, ShiftMode::Symmetric] {
            let map = RecoilMap::new(&space, &quad, eta, mode).unwrap();
            let mut explicit = CMat::zeros(18, 18);
            for (&u, &w) in quad.nodes().iter().zip(quad.weights()) {
                let s = match mode {
                    ShiftMode::Full => u - 1.0,
                    ShiftMode::Symmetric => u,
                };
                let k = recoil_kernel(&space, eta, -s);
                explicit += (k.matrix() * &rho * k.matrix().adjoint())
                    * C64::new(w * AngularQuadrature::dipole(u), 0.0);
            }
            assert!(max_abs_diff(&map.apply(&rho), &explicit) < 1e-12);
        }
    }

    #[test]
    fn low_order_quadrature_rejected() {
        let space = FockSpace::new(8).unwrap();
        let quad = AngularQuadrature::new(3).unwrap();
        let rho = FockOperator::density(fock_density(8, 0)).unwrap();
        assert!(angular_average(&space, &quad, 0.1, &rho, ShiftMode::Full).is_err());
    }

    #[test]
    fn symmetric_kick_on_ground_state() {
        // Brute-force Riemann oracle for ½∫N(u)u²du, independent of the quadrature.
        let m = 100_000;
        let du = 2.0 / m as f64;
        let alpha_prime: f64 = (0..m)
            .map(|k| {
                let u = -1.0 + (k as f64 + 0.5) * du;
                0.5 * 0.375 * (1.0 + u * u) * u * u * du
            })
            .sum();
        let eta = 0.3;
        let space = FockSpace::new(40).unwrap();
        let ops = ladder_ops(&space);
        let rho = FockOperator::density(fock_density(40, 0)).unwrap();
        let out = angular_average(
            &space,
            &AngularQuadrature::default(),
            eta,
            &rho,
            ShiftMode::Symmetric,
        )
        .unwrap();
        let n = expect(ops.n.matrix(), out.matrix()).re;
        assert!((n - eta * eta * alpha_prime).abs() < 1e-6, "n = {n}");
    }

    #[test]
    fn trace_preserved_for_hermitian_input() {
        let space = FockSpace::new(25).unwrap();
        let quad = AngularQuadrature::default();
        let mut h = CMat::from_fn(25, 25, |r, c| C64::new((r as f64 - c as f64).sin(), (r * c) as f64 * 0.01));
        hermitize(&mut h);
        let h = FockOperator::hermitian(h);
        let out = angular_average(&space, &quad, 0.8, &h, ShiftMode::Full).unwrap();
        assert!((out.trace() - h.trace()).norm() < 1e-10);
        let th = FockOperator::density(thermal_density(25, 0.4)).unwrap();
        let out = angular_average(&space, &quad, 0.8, &th, ShiftMode::Symmetric).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-10);
    }
}
