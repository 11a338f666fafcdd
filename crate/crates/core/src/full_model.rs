// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! The three-level atom coupled to its motion, without adiabatic elimination.
//!
//! States live on `C³ ⊗ Fock` with internal order `(g, r, e)`; the product
//! index is `internal · N + n`.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::hilbert::{
    check_density, hermitize, ladder_ops, recoil_kernel, AngularQuadrature, FockOperator,
    FockSpace, OperatorTag,
};
use crate::lambda::{check_epsilon, AtomParams};
use crate::superop::{SparseOp, Superop, SuperopBuilder};
use crate::{CMat, C64};

pub const G: usize = 0;
pub const R: usize = 1;
pub const E: usize = 2;

/// Largest trace change of a single stochastic step before renormalisation.
pub const STEP_TRACE_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrapParams {
    pub nu: f64,
    pub space: FockSpace,
}

impl TrapParams {
    pub fn new(nu: f64, space: FockSpace) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid("trap.nu", "trap frequency must be positive"));
        }
        Ok(TrapParams { nu, space })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `ρ ↦ U ρ U†`: from the moving frame back to the lab frame.
    Forward,
    /// `ρ ↦ U† ρ U`: from the lab frame into the moving frame.
    Inverse,
}

/// Density operator on `C³ ⊗ Fock`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    rho: CMat,
    cutoff: usize,
}

impl FullState {
    pub fn new(rho: CMat, cutoff: usize) -> Result<Self> {
        if rho.nrows() != 3 * cutoff || !rho.is_square() {
            return Err(Error::invalid("rho", "expected a 3N × 3N matrix"));
        }
        let mut rho = rho;
        hermitize(&mut rho);
        check_density(&rho)?;
        Ok(FullState { rho, cutoff })
    }

    /// `ρ_int ⊗ μ`.
    pub fn product(internal: &Matrix3<C64>, motion: &CMat) -> Result<Self> {
        let n = motion.nrows();
        let mut rho = CMat::zeros(3 * n, 3 * n);
        for i in 0..3 {
            for j in 0..3 {
                let c = internal[(i, j)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                rho.view_mut((i * n, j * n), (n, n)).copy_from(&(motion * c));
            }
        }
        Self::new(rho, n)
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Motional state `Tr_I ρ`.
    pub fn motional(&self) -> CMat {
        let n = self.cutoff;
        let mut mu = CMat::zeros(n, n);
        for i in 0..3 {
            mu += self.rho.view((i * n, i * n), (n, n));
        }
        mu
    }

    /// Internal state `Tr_E ρ`.
    pub fn internal(&self) -> Matrix3<C64> {
        let n = self.cutoff;
        Matrix3::from_fn(|i, j| (0..n).map(|k| self.rho[(i * n + k, j * n + k)]).sum())
    }

    pub fn population(&self, level: usize) -> f64 {
        self.internal()[(level, level)].re
    }
}

fn level_op(i: usize, j: usize, n: usize, block: &CMat) -> CMat {
    let mut m = CMat::zeros(3 * n, 3 * n);
    m.view_mut((i * n, j * n), (n, n)).copy_from(block);
    m
}

/// System Hamiltonian in the frame rotating with both lasers.
pub fn build_h_s(atom: &AtomParams, trap: &TrapParams) -> Result<FockOperator> {
    atom.validate()?;
    let space = &trap.space;
    let n = space.dim();
    let ops = ladder_ops(space);
    let id = CMat::identity(n, n);
    let num = ops.n.matrix() * C64::new(trap.nu, 0.0);
    let mut h = CMat::zeros(3 * n, 3 * n);
    for i in 0..3 {
        h += level_op(i, i, n, &num);
    }
    h += level_op(E, E, n, &(&id * C64::new(-atom.delta_p, 0.0)));
    h += level_op(R, R, n, &(&id * C64::new(-(atom.delta_p - atom.delta_l), 0.0)));
    let kr = recoil_kernel(space, atom.eta_r, 1.0).into_matrix() * C64::new(atom.omega_l / 2.0, 0.0);
    let kg = recoil_kernel(space, atom.eta_g, 1.0).into_matrix() * C64::new(atom.g / 2.0, 0.0);
    let er = level_op(E, R, n, &kr);
    let eg = level_op(E, G, n, &kg);
    h += &er + er.adjoint() + &eg + eg.adjoint();
    Ok(FockOperator::hermitian(h))
}

/// `U = exp(i η_g ẑ |e⟩⟨e|) exp(i η̄ ẑ |r⟩⟨r|)`, the frame change under which
/// both laser couplings become position independent.
pub fn frame_unitary(atom: &AtomParams, trap: &TrapParams) -> FockOperator {
    let space = &trap.space;
    let n = space.dim();
    let eta_bar = atom.eta_g - atom.eta_r;
    let mut u = level_op(G, G, n, &CMat::identity(n, n));
    u += level_op(R, R, n, recoil_kernel(space, eta_bar, 1.0).matrix());
    u += level_op(E, E, n, recoil_kernel(space, atom.eta_g, 1.0).matrix());
    FockOperator::new(u, OperatorTag::Unitary).expect("block-diagonal unitary")
}

/// Moving-frame Hamiltonian written down directly: Doppler shifts `ν η p̂`
/// and recoil shifts `ν η²/2` on `|e⟩` and `|r⟩`, position-free couplings.
pub fn transformed_hamiltonian(atom: &AtomParams, trap: &TrapParams) -> FockOperator {
    let n = trap.space.dim();
    let ops = ladder_ops(&trap.space);
    let nu = trap.nu;
    let id = CMat::identity(n, n);
    let eta_bar = atom.eta_g - atom.eta_r;
    let num = ops.n.matrix() * C64::new(nu, 0.0);
    let p = ops.p.matrix();
    let shifted = |eta: f64, offset: f64| {
        &num + p * C64::new(nu * eta, 0.0) + &id * C64::new(nu * eta * eta / 2.0 + offset, 0.0)
    };
    let mut h = level_op(G, G, n, &num);
    h += level_op(R, R, n, &shifted(eta_bar, -(atom.delta_p - atom.delta_l)));
    h += level_op(E, E, n, &shifted(atom.eta_g, -atom.delta_p));
    let er = level_op(E, R, n, &(&id * C64::new(atom.omega_l / 2.0, 0.0)));
    let eg = level_op(E, G, n, &(&id * C64::new(atom.g / 2.0, 0.0)));
    h += &er + er.adjoint() + &eg + eg.adjoint();
    FockOperator::hermitian(h)
}

/// Full atom ⊗ motion model with its assembled Liouvillian.
#[derive(Debug, Clone)]
pub struct FullModel {
    atom: AtomParams,
    trap: TrapParams,
    h_s: FockOperator,
    liouvillian: Superop,
    jump: SparseOp,
    jump_dag: SparseOp,
}

impl FullModel {
    pub fn new(atom: AtomParams, trap: TrapParams) -> Result<Self> {
        Self::with_quadrature(atom, trap, &AngularQuadrature::default())
    }

    pub fn with_quadrature(
        atom: AtomParams,
        trap: TrapParams,
        quad: &AngularQuadrature,
    ) -> Result<Self> {
        if quad.order() < 4 {
            return Err(Error::invalid(
                "quadrature_order",
                format!("angular averages need order >= 4, got {}", quad.order()),
            ));
        }
        let h_s = build_h_s(&atom, &trap)?;
        let space = &trap.space;
        let n = space.dim();
        let d = 3 * n;

        let mut h_eff = h_s.matrix().clone();
        for k in 0..n {
            h_eff[(E * n + k, E * n + k)] -= C64::new(0.0, atom.gamma / 2.0);
        }
        let mut b = SuperopBuilder::new(d);
        b.sandwich(C64::new(0.0, -1.0), Some(&SparseOp::from_dense(&h_eff)), None);
        b.sandwich(
            C64::new(0.0, 1.0),
            None,
            Some(&SparseOp::from_dense(&h_eff.adjoint())),
        );
        for (level, rate, eta) in [(G, atom.gamma_g, atom.eta_g), (R, atom.gamma_r, atom.eta_r)] {
            if rate > 0.0 {
                add_recycling(&mut b, space, quad, level, rate, eta);
            }
        }
        let liouvillian = b.build();

        let kick = recoil_kernel(space, atom.eta_g, -1.0);
        let jump_dense = level_op(G, E, n, kick.matrix());
        let jump = SparseOp::from_dense(&jump_dense);
        let jump_dag = jump.adjoint();
        Ok(FullModel {
            atom,
            trap,
            h_s,
            liouvillian,
            jump,
            jump_dag,
        })
    }

    pub fn atom(&self) -> &AtomParams {
        &self.atom
    }

    pub fn trap(&self) -> &TrapParams {
        &self.trap
    }

    pub fn hamiltonian(&self) -> &FockOperator {
        &self.h_s
    }

    pub fn liouvillian(&self) -> &Superop {
        &self.liouvillian
    }

    /// Probe-channel jump operator `ĉ_p = exp(−i η_g ẑ) σ_ge`.
    pub fn jump(&self) -> &SparseOp {
        &self.jump
    }

    /// `L ρ`, after checking the truncation guard.
    pub fn liouvillian_apply(&self, state: &FullState) -> Result<CMat> {
        self.trap.space.guard_product(state.matrix(), 3)?;
        Ok(self.liouvillian.apply(state.matrix()))
    }

    /// Largest step allowed for deterministic integration.
    pub fn max_step(&self) -> f64 {
        let omega = self.atom.omega();
        0.01 * [self.atom.gamma, omega, self.trap.nu]
            .into_iter()
            .filter(|&x| x > 0.0)
            .map(|x| 1.0 / x)
            .fold(f64::INFINITY, f64::min)
    }

    /// One Euler–Maruyama step of the conditioned master equation with the
    /// collected probe channel unravelled, followed by renormalisation.
    /// Returns the new state and the time-bin averaged homodyne current.
    pub fn conditioned_step(
        &self,
        state: &FullState,
        epsilon: f64,
        phi: f64,
        dw: f64,
        dt: f64,
    ) -> Result<(FullState, f64)> {
        check_epsilon(epsilon)?;
        let rho = state.matrix();
        let kappa = epsilon * self.atom.gamma_g;
        let lo = C64::from_polar(1.0, -phi);
        let c_rho = self.jump.left_mul(rho) * lo;
        let rho_cd = self.jump_dag.right_mul(rho) * lo.conj();
        let signal = (c_rho.trace() + rho_cd.trace()).re;
        let innovation = &c_rho + &rho_cd - rho * C64::new(signal, 0.0);
        let mut next = rho
            + self.liouvillian.apply(rho) * C64::new(dt, 0.0)
            + innovation * C64::new(kappa.sqrt() * dw, 0.0);
        let tr = next.trace().re;
        if (tr - 1.0).abs() > STEP_TRACE_LIMIT {
            return Err(Error::StepSize {
                deviation: tr - 1.0,
            });
        }
        next /= C64::new(tr, 0.0);
        hermitize(&mut next);
        self.trap.space.guard_product(&next, 3)?;
        let current = kappa * signal + kappa.sqrt() * dw / dt;
        Ok((
            FullState {
                rho: next,
                cutoff: state.cutoff,
            },
            current,
        ))
    }

    pub fn transform_u(&self, state: &FullState, direction: Direction) -> FullState {
        let u = frame_unitary(&self.atom, &self.trap);
        let u = u.matrix();
        let rho = match direction {
            Direction::Forward => u * state.matrix() * u.adjoint(),
            Direction::Inverse => u.adjoint() * state.matrix() * u,
        };
        FullState {
            rho,
            cutoff: state.cutoff,
        }
    }
}

/// `rate · Σ_k w_k N(u_k) K_k ρ_ee K_k†` into the `level` block, with
/// `K_k = exp(−i η u_k ẑ)`.
fn add_recycling(
    b: &mut SuperopBuilder,
    space: &FockSpace,
    quad: &AngularQuadrature,
    level: usize,
    rate: f64,
    eta: f64,
) {
    let n = space.dim();
    let d = 3 * n;
    let mut t = CMat::zeros(n * n, n * n);
    for (u, w) in quad.weighted_nodes() {
        let k = recoil_kernel(space, eta, -u).into_matrix();
        for m in 0..n {
            for a in 0..n {
                let kma = k[(m, a)] * (rate * w);
                for q in 0..n {
                    for bb in 0..n {
                        t[(m * n + q, a * n + bb)] += kma * k[(q, bb)].conj();
                    }
                }
            }
        }
    }
    let max = t.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for m in 0..n {
        for q in 0..n {
            for a in 0..n {
                for bb in 0..n {
                    let v = t[(m * n + q, a * n + bb)];
                    if v.norm() > crate::superop::DROP_TOL * max {
                        b.entry(
                            (level * n + m) * d + level * n + q,
                            (E * n + a) * d + E * n + bb,
                            v,
                        );
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_density, fock_density, max_abs_diff, min_eigenvalue};
    use crate::ode::{evolve, evolve_checkpoints};

    fn atom() -> AtomParams {
        AtomParams {
            gamma: 2.0,
            gamma_g: 1.2,
            gamma_r: 0.8,
            omega_l: 3.0,
            g: 0.5,
            delta_p: 0.3,
            delta_l: 0.1,
            eta_g: 0.15,
            eta_r: -0.1,
        }
    }

    fn trap(n: usize) -> TrapParams {
        TrapParams::new(1.0, FockSpace::new(n).unwrap()).unwrap()
    }

    fn ket_density(v: &[C64]) -> Matrix3<C64> {
        Matrix3::from_fn(|i, j| v[i] * v[j].conj())
    }

    #[test]
    fn uncoupled_hamiltonian_is_diagonal() {
        let a = AtomParams {
            omega_l: 0.0,
            g: 0.0,
            ..atom()
        };
        let t = trap(6);
        let h = build_h_s(&a, &t).unwrap();
        for i in 0..3 {
            for k in 0..6 {
                let want = k as f64
                    - match i {
                        G => 0.0,
                        R => a.delta_p - a.delta_l,
                        _ => a.delta_p,
                    };
                assert!((h.matrix()[(i * 6 + k, i * 6 + k)].re - want).abs() < 1e-14);
            }
        }
        let off: f64 = h
            .matrix()
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx % 19 != 0)
            .map(|(_, v)| v.norm())
            .sum();
        assert!(off < 1e-14);
    }

    #[test]
    fn decoupled_ground_block_is_exact_oscillator() {
        let a = AtomParams {
            g: 0.0,
            eta_g: 0.0,
            eta_r: 0.0,
            ..atom()
        };
        let t = trap(8);
        let h = build_h_s(&a, &t).unwrap();
        let ops = ladder_ops(&t.space);
        let block = h.matrix().view((0, 0), (8, 8)).into_owned();
        assert!(max_abs_diff(&block, ops.n.matrix()) < 1e-14);
        assert!(h.matrix().view((0, 8), (8, 16)).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn hamiltonian_hermitian() {
        let h = build_h_s(&atom(), &trap(10)).unwrap();
        assert!(max_abs_diff(h.matrix(), &h.matrix().adjoint()) < 1e-12);
    }

    #[test]
    fn frame_change_matches_direct_moving_frame_hamiltonian() {
        let a = atom();
        let n = 60;
        let t = trap(n);
        let u = frame_unitary(&a, &t);
        assert!(u.validate().is_ok());
        let moved = u.matrix().adjoint() * build_h_s(&a, &t).unwrap().matrix() * u.matrix();
        let want = transformed_hamiltonian(&a, &t);
        // compare on low Fock levels, away from the truncation edge
        let k = 20;
        for i in 0..3 {
            for j in 0..3 {
                let x = moved.view((i * n, j * n), (k, k)).into_owned();
                let y = want.matrix().view((i * n, j * n), (k, k)).into_owned();
                assert!(max_abs_diff(&x, &y) < 1e-9, "block ({i},{j})");
            }
        }
    }

    #[test]
    fn dark_state_residual_is_linear_in_nu() {
        let base = AtomParams {
            gamma_g: 2.0,
            gamma_r: 0.0,
            delta_l: 0.0,
            ..atom()
        };
        let n = 30;
        let mut prev = None;
        for nu in [0.01, 0.02, 0.04] {
            let a = AtomParams {
                delta_p: base.dark_resonance_delta_p(nu),
                ..base
            };
            let t = TrapParams::new(nu, FockSpace::new(n).unwrap()).unwrap();
            let h = transformed_hamiltonian(&a, &t);
            let omega = a.omega();
            let mut psi = nalgebra::DVector::<C64>::zeros(3 * n);
            psi[G * n] = C64::new(-a.omega_l / omega, 0.0);
            psi[R * n] = C64::new(a.g / omega, 0.0);
            let res = (h.matrix() * &psi).norm();
            if let Some(p) = prev {
                let ratio: f64 = res / p;
                assert!((ratio - 2.0).abs() < 1e-6, "ratio {ratio}");
            }
            prev = Some(res);
        }
    }

    #[test]
    fn transform_is_involutive_and_trivial_without_recoil() {
        let m = FullModel::new(atom(), trap(8)).unwrap();
        let s = FullState::product(
            &ket_density(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]),
            &coherent_density(8, C64::new(0.3, 0.1)),
        )
        .unwrap();
        let back = m.transform_u(&m.transform_u(&s, Direction::Forward), Direction::Inverse);
        assert!(max_abs_diff(back.matrix(), s.matrix()) < 1e-12);
        let flat = AtomParams {
            eta_g: 0.0,
            eta_r: 0.0,
            ..atom()
        };
        let m0 = FullModel::new(flat, trap(8)).unwrap();
        assert!(max_abs_diff(m0.transform_u(&s, Direction::Forward).matrix(), s.matrix()) < 1e-14);
    }

    #[test]
    fn dark_ground_state_is_stationary() {
        let a = AtomParams { g: 0.0, ..atom() };
        let m = FullModel::new(a, trap(8)).unwrap();
        let s = FullState::product(&ket_density(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]), &fock_density(8, 0)).unwrap();
        let d = m.liouvillian_apply(&s).unwrap();
        assert!(d.iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn liouvillian_trace_preserving() {
        let m = FullModel::new(atom(), trap(8)).unwrap();
        assert!(m.liouvillian().trace_defect() < 1e-10);
    }

    #[test]
    fn pure_excited_decay() {
        let a = AtomParams {
            omega_l: 0.0,
            g: 0.0,
            ..atom()
        };
        let m = FullModel::new(a, trap(12)).unwrap();
        let s = FullState::product(&ket_density(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]), &fock_density(12, 0)).unwrap();
        let times = [0.0, 0.5, 1.0, 2.0];
        let out = evolve_checkpoints(m.liouvillian(), s.matrix(), &times, m.max_step());
        for (t, rho) in times.iter().zip(out) {
            let pe = FullState { rho, cutoff: 12 }.population(E);
            assert!((pe - (-a.gamma * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn evolution_keeps_density_invariants() {
        let m = FullModel::new(atom(), trap(10)).unwrap();
        let s = FullState::product(&ket_density(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]), &fock_density(10, 1)).unwrap();
        let rho = evolve(m.liouvillian(), s.matrix(), 1.0, m.max_step());
        assert!((rho.trace().re - 1.0).abs() < 1e-9);
        assert!(min_eigenvalue(&rho) > -1e-8);
        assert!(max_abs_diff(&rho, &rho.adjoint()) < 1e-12);
    }

    #[test]
    fn conditioned_step_without_collection_is_deterministic() {
        let m = FullModel::new(atom(), trap(8)).unwrap();
        let s = FullState::product(&ket_density(&[C64::new(0.6, 0.0), C64::new(0.8, 0.0), C64::new(0.0, 0.0)]), &fock_density(8, 0)).unwrap();
        let dt = 1e-3;
        let (next, current) = m.conditioned_step(&s, 1e-12, 0.0, 0.0, dt).unwrap();
        let euler = s.matrix() + m.liouvillian().apply(s.matrix()) * C64::new(dt, 0.0);
        assert!(max_abs_diff(next.matrix(), &(&euler / euler.trace())) < 1e-12);
        assert!(current.abs() < 1e-10);
    }

    #[test]
    fn recycling_weights_split_by_branching() {
        // decay with Ω_L = g = 0 feeds |g⟩ and |r⟩ in the ratio Γ_g : Γ_r
        let a = AtomParams {
            omega_l: 0.0,
            g: 0.0,
            ..atom()
        };
        let m = FullModel::new(a, trap(12)).unwrap();
        let s = FullState::product(&ket_density(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]), &fock_density(12, 0)).unwrap();
        let rho = evolve(m.liouvillian(), s.matrix(), 20.0, m.max_step());
        let st = FullState { rho, cutoff: 12 };
        assert!((st.population(G) - 0.6).abs() < 1e-6);
        assert!((st.population(R) - 0.4).abs() < 1e-6);
    }

    #[test]
    fn product_state_traces() {
        let mu = coherent_density(9, C64::new(0.5, 0.0));
        let int = ket_density(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]);
        let s = FullState::product(&int, &mu).unwrap();
        assert!(max_abs_diff(&s.motional(), &mu) < 1e-14);
        assert!((s.internal() - int).norm() < 1e-12);
    }
}
