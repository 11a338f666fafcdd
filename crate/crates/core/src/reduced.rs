// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Motional dynamics after adiabatic elimination of the internal states.
//!
//! A conditioned master equation is represented by an [`Unraveling`]: a
//! deterministic generator, an optional recoil back-action map, and one
//! homodyne channel `(c, κ)` with innovation `√κ H[c]μ dW` and current
//! `κ⟨c + c†⟩ + √κ dW/dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::full_model::{TrapParams, STEP_TRACE_LIMIT};
use crate::hilbert::{
    check_density, hermitize, ladder_ops, AngularQuadrature, FockSpace, LadderOps, RecoilMap,
    ShiftMode, EDGE_POPULATION_LIMIT,
};
use crate::lambda::{check_epsilon, dressed_states, AtomParams, SidebandModel};
use crate::superop::{flatten, unflatten, SparseOp, Superop, SuperopBuilder};
use crate::{CMat, C64};

/// Truncation target for the recycling series: `(Γ_r/Γ)^(n_max+1)` below this.
pub const SERIES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementParams {
    pub epsilon: f64,
    pub phi: f64,
    /// Highest power of the recycling map kept in the back-action series.
    pub series_cutoff: Option<usize>,
}

impl MeasurementParams {
    pub fn new(epsilon: f64, phi: f64) -> Result<Self> {
        let m = MeasurementParams {
            epsilon,
            phi,
            series_cutoff: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon).map_err(|_| {
            Error::invalid(
                "measurement.epsilon",
                format!("collection efficiency must lie in (0, 1], got {}", self.epsilon),
            )
        })?;
        if !self.phi.is_finite() {
            return Err(Error::invalid("measurement.phi", "must be finite"));
        }
        Ok(())
    }

    /// Series cutoff actually used for a branching ratio `Γ_r/Γ`.
    pub fn series_terms(&self, ratio: f64) -> usize {
        self.series_cutoff.unwrap_or_else(|| default_series_cutoff(ratio))
    }
}

/// Smallest `n` with `ratio^(n+1) < SERIES_TOL`.
pub fn default_series_cutoff(ratio: f64) -> usize {
    if ratio <= 0.0 {
        return 0;
    }
    let mut n = 0;
    let mut pow = ratio;
    while pow >= SERIES_TOL {
        pow *= ratio;
        n += 1;
    }
    n
}

/// Density operator of the motion alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    mu: CMat,
}

impl ReducedState {
    pub fn new(mut mu: CMat) -> Result<Self> {
        hermitize(&mut mu);
        check_density(&mu)?;
        Ok(ReducedState { mu })
    }

    pub fn matrix(&self) -> &CMat {
        &self.mu
    }

    pub fn into_matrix(self) -> CMat {
        self.mu
    }
}

/// Recoil part of the back-action, `Γ₀ J̃_g Σ_n J̃_r^n (p̂ μ p̂)`, stored as a
/// single multiplier in the `ẑ` eigenbasis.
#[derive(Debug, Clone)]
pub struct RecoilBackaction {
    map: RecoilMap,
    p: CMat,
}

impl RecoilBackaction {
    pub fn apply(&self, mu: &CMat) -> CMat {
        self.map.apply(&(&self.p * mu * &self.p))
    }
}

/// Sparse and dense oscillator operators for one Fock space.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    space: FockSpace,
    nu: f64,
    ops: LadderOps,
    z: SparseOp,
    p: SparseOp,
    p2: SparseOp,
    a: SparseOp,
    a_dag: SparseOp,
    n: SparseOp,
}

impl ReducedModel {
    pub fn new(trap: &TrapParams) -> Self {
        let ops = ladder_ops(&trap.space);
        let p2 = ops.p.matrix() * ops.p.matrix();
        ReducedModel {
            space: trap.space.clone(),
            nu: trap.nu,
            z: SparseOp::from_dense(ops.z.matrix()),
            p: SparseOp::from_dense(ops.p.matrix()),
            p2: SparseOp::from_dense(&p2),
            a: SparseOp::from_dense(ops.a.matrix()),
            a_dag: SparseOp::from_dense(ops.a_dag.matrix()),
            n: SparseOp::from_dense(ops.n.matrix()),
            ops,
        }
    }

    /// Same operators with a different oscillator frequency; `ν = 0` is a
    /// free particle.
    pub fn with_frequency(mut self, nu: f64) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::invalid("trap.nu", "frequency must be finite and >= 0"));
        }
        self.nu = nu;
        Ok(self)
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ops(&self) -> &LadderOps {
        &self.ops
    }

    pub fn z(&self) -> &SparseOp {
        &self.z
    }

    pub fn p(&self) -> &SparseOp {
        &self.p
    }

    pub fn a(&self) -> &SparseOp {
        &self.a
    }

    pub fn a_dag(&self) -> &SparseOp {
        &self.a_dag
    }

    pub fn number(&self) -> &SparseOp {
        &self.n
    }

    /// Lamb-Dicke back-action `−(Γ₀/2)[p̂, [p̂, μ]]`.
    pub fn l_m_lamb_dicke(&self, mu: &CMat, gamma0: f64) -> CMat {
        let pm = self.p.left_mul(mu);
        let mp = self.p.right_mul(mu);
        let c = &pm - &mp;
        (self.p.left_mul(&c) - self.p.right_mul(&c)) * C64::new(-gamma0 / 2.0, 0.0)
    }

    /// Recoil part of the back-action with the `J̃_r` series truncated at the
    /// cutoff from `meas`.
    pub fn recoil_backaction(
        &self,
        atom: &AtomParams,
        meas: &MeasurementParams,
        quad: &AngularQuadrature,
        gamma0: f64,
    ) -> Result<RecoilBackaction> {
        atom.validate()?;
        if atom.gamma_r >= atom.gamma_g {
            return Err(Error::invalid(
                "atom.gamma_r",
                "the recycling series needs Gamma_r < Gamma_g",
            ));
        }
        let fg = RecoilMap::new(&self.space, quad, atom.eta_g, ShiftMode::Full)?;
        let mut mult = fg.multiplier() * C64::new(gamma0 * atom.gamma_g / atom.gamma, 0.0);
        let ratio = atom.gamma_r / atom.gamma;
        let terms = meas.series_terms(ratio);
        if terms > 0 {
            let fr = RecoilMap::new(&self.space, quad, atom.eta_r, ShiftMode::Full)?;
            let step = fr.multiplier() * C64::new(ratio, 0.0);
            let mut power = CMat::from_element(self.space.dim(), self.space.dim(), C64::new(1.0, 0.0));
            let mut series = power.clone();
            for _ in 0..terms {
                power.component_mul_assign(&step);
                series += &power;
            }
            mult.component_mul_assign(&series);
        }
        Ok(RecoilBackaction {
            map: RecoilMap::from_multiplier(&self.space, mult),
            p: self.ops.p.matrix().clone(),
        })
    }

    /// Full back-action `(Γ₀/2)[2 J̃_g Σ_n J̃_r^n (p̂μp̂) − p̂²μ − μp̂²]`.
    pub fn l_m_full(
        &self,
        mu: &CMat,
        atom: &AtomParams,
        meas: &MeasurementParams,
        quad: &AngularQuadrature,
        gamma0: f64,
    ) -> Result<CMat> {
        let rb = self.recoil_backaction(atom, meas, quad, gamma0)?;
        let anti = self.p2.left_mul(mu) + self.p2.right_mul(mu);
        Ok(rb.apply(mu) - anti * C64::new(gamma0 / 2.0, 0.0))
    }

    /// `−iν[n̂, μ] − (Γ₀/2)[p̂, [p̂, μ]]`.
    pub fn lamb_dicke_generator(&self, gamma0: f64) -> Superop {
        let mut b = SuperopBuilder::new(self.space.dim());
        b.hamiltonian(&scaled(&self.n, self.nu))
            .double_commutator(C64::new(-gamma0 / 2.0, 0.0), &self.p);
        b.build()
    }

    /// Resonant Lamb-Dicke unravelling: `p̂` measured at rate `εΓ₀`, `φ = 0`.
    pub fn resonant(&self, gamma0: f64, epsilon: f64) -> Result<Unraveling> {
        check_epsilon(epsilon)?;
        Ok(Unraveling {
            space: self.space.clone(),
            generator: self.lamb_dicke_generator(gamma0),
            recoil: None,
            channel: self.p.clone(),
            kappa: epsilon * gamma0,
        })
    }

    /// Unravelling with the detuning term `λ²Δp̂²` (optional) and the full
    /// recoil back-action at rate `Γ₀ = λ²Γ`; `p̂ e^{−iφ}` is measured at rate
    /// `ελ²Γ_g`.
    pub fn general(
        &self,
        atom: &AtomParams,
        meas: &MeasurementParams,
        quad: &AngularQuadrature,
        keep_detuning: bool,
    ) -> Result<Unraveling> {
        meas.validate()?;
        let d = dressed_states(atom, self.nu)?;
        let l2 = d.lambda * d.lambda;
        let gamma0 = d.gamma0;
        let mut h = self.n.to_dense() * C64::new(self.nu, 0.0);
        if keep_detuning {
            h -= self.p2.to_dense() * C64::new(l2 * d.delta, 0.0);
        }
        let mut b = SuperopBuilder::new(self.space.dim());
        b.hamiltonian(&SparseOp::from_dense(&h));
        b.sandwich(C64::new(-gamma0 / 2.0, 0.0), Some(&self.p2), None)
            .sandwich(C64::new(-gamma0 / 2.0, 0.0), None, Some(&self.p2));
        let recoil = self.recoil_backaction(atom, meas, quad, gamma0)?;
        Ok(Unraveling {
            space: self.space.clone(),
            generator: b.build(),
            recoil: Some(recoil),
            channel: scaled_c(&self.p, C64::from_polar(1.0, -meas.phi)),
            kappa: meas.epsilon * l2 * atom.gamma_g,
        })
    }

    /// Lamb-Dicke unravelling at general detuning with the jump operator
    /// `Ĉ = (√2νΓ/Ω²)(I(−ν)â + I(ν)â†)`.
    pub fn detuned(&self, sideband: &SidebandModel, meas: &MeasurementParams) -> Result<Unraveling> {
        meas.validate()?;
        if (sideband.nu - self.nu).abs() > 1e-12 * self.nu {
            return Err(Error::invalid(
                "nu",
                "sideband model and trap disagree on the trap frequency",
            ));
        }
        let rates = sideband.rates(0.0, meas.epsilon, meas.phi)?;
        let mut b = SuperopBuilder::new(self.space.dim());
        b.hamiltonian(&scaled(&self.n, self.nu + rates.delta))
            .dissipator(rates.a_minus, &self.a)
            .dissipator(rates.a_plus, &self.a_dag);
        Ok(Unraveling {
            space: self.space.clone(),
            generator: b.build(),
            recoil: None,
            channel: scaled_c(&self.jump_operator(sideband), C64::from_polar(1.0, -meas.phi)),
            kappa: meas.epsilon * sideband.gamma0,
        })
    }

    /// `Ĉ` as a sparse operator.
    pub fn jump_operator(&self, sideband: &SidebandModel) -> SparseOp {
        let (ca, cad) = sideband.jump_coefficients();
        SparseOp::from_dense(&(self.ops.a.matrix() * ca + self.ops.a_dag.matrix() * cad))
    }
}

pub(crate) fn scaled(op: &SparseOp, s: f64) -> SparseOp {
    scaled_c(op, C64::new(s, 0.0))
}

pub(crate) fn scaled_c(op: &SparseOp, s: C64) -> SparseOp {
    SparseOp::from_dense(&(op.to_dense() * s))
}

/// Result of one stochastic step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Time-bin averaged homodyne current.
    pub current: f64,
    /// Trace minus one before renormalisation.
    pub trace_correction: f64,
}

/// Scratch space for [`Unraveling::step_flat`].
#[derive(Debug, Clone)]
pub struct StepScratch {
    deriv: Vec<C64>,
    cx: Vec<C64>,
}

impl StepScratch {
    pub fn new(n: usize) -> Self {
        StepScratch {
            deriv: vec![C64::new(0.0, 0.0); n * n],
            cx: vec![C64::new(0.0, 0.0); n * n],
        }
    }
}

/// A conditioned master equation with one diffusive channel.
#[derive(Debug, Clone)]
pub struct Unraveling {
    space: FockSpace,
    generator: Superop,
    recoil: Option<RecoilBackaction>,
    channel: SparseOp,
    kappa: f64,
}

impl Unraveling {
    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn channel(&self) -> &SparseOp {
        &self.channel
    }

    /// Sparse part of the deterministic generator.
    pub fn generator(&self) -> &Superop {
        &self.generator
    }

    /// Deterministic (noise-averaged) generator applied to `mu`.
    pub fn mean_apply(&self, mu: &CMat) -> CMat {
        let mut out = self.generator.apply(mu);
        if let Some(r) = &self.recoil {
            out += r.apply(mu);
        }
        out
    }

    /// Signal part `⟨c + c†⟩` for a flattened state.
    pub fn signal_flat(&self, x: &[C64], scratch: &mut StepScratch) -> f64 {
        self.channel.left_mul_flat(x, &mut scratch.cx);
        let n = self.space.dim();
        2.0 * (0..n).map(|m| scratch.cx[m * n + m].re).sum::<f64>()
    }

    /// Euler–Maruyama step on a row-major flattened state, renormalised.
    pub fn step_flat(
        &self,
        x: &mut [C64],
        dw: f64,
        dt: f64,
        scratch: &mut StepScratch,
    ) -> Result<StepInfo> {
        let n = self.space.dim();
        self.generator.apply_vec(x, &mut scratch.deriv);
        if let Some(r) = &self.recoil {
            let extra = flatten(&r.apply(&unflatten(n, x)));
            for (d, e) in scratch.deriv.iter_mut().zip(extra) {
                *d += e;
            }
        }
        let signal = self.signal_flat(x, scratch);
        let amp = self.kappa.sqrt() * dw;
        let cx = &scratch.cx;
        let deriv = &scratch.deriv;
        let mut next = vec![C64::new(0.0, 0.0); n * n];
        for m in 0..n {
            for q in 0..n {
                let i = m * n + q;
                let innovation = cx[i] + cx[q * n + m].conj() - x[i] * signal;
                next[i] = x[i] + deriv[i] * dt + innovation * amp;
            }
        }
        let tr: f64 = (0..n).map(|m| next[m * n + m].re).sum();
        if !tr.is_finite() || (tr - 1.0).abs() > STEP_TRACE_LIMIT {
            return Err(Error::StepSize {
                deviation: tr - 1.0,
            });
        }
        for m in 0..n {
            for q in m..n {
                let v = (next[m * n + q] + next[q * n + m].conj()) / (2.0 * tr);
                x[m * n + q] = v;
                x[q * n + m] = v.conj();
            }
        }
        let band = self.space.edge_band();
        let edge: f64 = (n - band..n).map(|k| x[k * n + k].re).sum();
        if edge > EDGE_POPULATION_LIMIT {
            return Err(Error::Cutoff {
                cutoff: n,
                population: edge,
                threshold: EDGE_POPULATION_LIMIT,
            });
        }
        Ok(StepInfo {
            current: self.kappa * signal + self.kappa.sqrt() * dw / dt,
            trace_correction: tr - 1.0,
        })
    }

    /// One step on a matrix state; returns the new state and current sample.
    pub fn step(&self, state: &ReducedState, dw: f64, dt: f64) -> Result<(ReducedState, f64)> {
        let n = self.space.dim();
        let mut x = flatten(state.matrix());
        let mut scratch = StepScratch::new(n);
        let info = self.step_flat(&mut x, dw, dt, &mut scratch)?;
        Ok((ReducedState { mu: unflatten(n, &x) }, info.current))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_density, expect, fock_density, max_abs_diff, thermal_density};

    fn trap(n: usize) -> TrapParams {
        TrapParams::new(1.0, FockSpace::new(n).unwrap()).unwrap()
    }

    fn random_density(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        // weight low levels so the interior block carries the state
        let g = CMat::from_fn(n, n, |r, c| {
            let w = (-(r as f64) / 2.0).exp();
            C64::new(next(), next()) * w * if c < n / 2 { 1.0 } else { 0.0 }
        });
        let rho = &g * g.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    fn atom(eta_g: f64, eta_r: f64, gamma_r: f64) -> AtomParams {
        AtomParams {
            gamma: 1.0,
            gamma_g: 1.0 - gamma_r,
            gamma_r,
            omega_l: 10.0,
            g: 1.0,
            delta_p: 0.0,
            delta_l: 0.0,
            eta_g,
            eta_r,
        }
    }

    #[test]
    fn series_cutoff_default() {
        assert_eq!(default_series_cutoff(0.0), 0);
        let n = default_series_cutoff(0.3);
        assert!(0.3f64.powi(n as i32 + 1) < 1e-10);
        assert!(0.3f64.powi(n as i32) >= 1e-10);
    }

    #[test]
    fn backaction_commutes_with_momentum_functions() {
        let m = ReducedModel::new(&trap(30));
        let mu = m.ops().p.matrix() * m.ops().p.matrix();
        let out = m.l_m_lamb_dicke(&mu, 0.7);
        assert!(out.iter().all(|v| v.norm() < 1e-12));
        assert!(m.l_m_lamb_dicke(&coherent_density(30, C64::new(0.5, 0.3)), 0.0).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn backaction_heating_rate_interior() {
        let n = 40;
        let m = ReducedModel::new(&trap(n));
        let gamma0 = 0.37;
        for seed in 0..20 {
            let mu = random_density(n, seed);
            let d = m.l_m_lamb_dicke(&mu, gamma0);
            let rate = expect(m.ops().n.matrix(), &d).re;
            assert!((rate - gamma0 / 2.0).abs() < 1e-8, "{rate}");
            assert!(d.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn full_backaction_reduces_to_lamb_dicke() {
        let n = 20;
        let m = ReducedModel::new(&trap(n));
        let quad = AngularQuadrature::default();
        let mu = random_density(n, 3);
        let meas = MeasurementParams::new(0.5, 0.0).unwrap();
        let a = m.l_m_full(&mu, &atom(0.0, 0.0, 0.3), &meas, &quad, 0.2).unwrap();
        let b = m.l_m_lamb_dicke(&mu, 0.2);
        assert!(max_abs_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn full_backaction_recoil_diffusion_on_vacuum() {
        // d⟨n⟩/dt = (Γ₀/2)(1 + 2η⟨p³⟩ + 1.4η²⟨p²⟩); on |0⟩ this is (Γ₀/2)(1 + 0.7η²)
        let n = 40;
        let m = ReducedModel::new(&trap(n));
        let quad = AngularQuadrature::default();
        let meas = MeasurementParams::new(1.0, 0.0).unwrap();
        let gamma0 = 0.5;
        let d = m
            .l_m_full(&fock_density(n, 0), &atom(0.2, 0.0, 0.0), &meas, &quad, gamma0)
            .unwrap();
        let rate = expect(m.ops().n.matrix(), &d).re;
        assert!((rate - gamma0 / 2.0 * (1.0 + 0.2 * 0.2 * 0.7)).abs() < 1e-10, "{rate}");
    }

    #[test]
    fn full_backaction_trace_preserving() {
        let n = 25;
        let m = ReducedModel::new(&trap(n));
        let quad = AngularQuadrature::default();
        let meas = MeasurementParams::new(1.0, 0.0).unwrap();
        for seed in 0..5 {
            let mu = random_density(n, seed + 10);
            let d = m.l_m_full(&mu, &atom(0.3, -0.2, 0.25), &meas, &quad, 1.0).unwrap();
            assert!(d.trace().norm() < 1e-8);
        }
    }

    #[test]
    fn series_rejects_strong_dressing_branch() {
        let m = ReducedModel::new(&trap(10));
        let quad = AngularQuadrature::default();
        let meas = MeasurementParams::new(1.0, 0.0).unwrap();
        let r = m.l_m_full(&fock_density(10, 0), &atom(0.1, 0.1, 0.5), &meas, &quad, 1.0);
        assert!(matches!(r, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn epsilon_outside_domain_names_field() {
        match MeasurementParams::new(1.5, 0.0) {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "measurement.epsilon"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_without_noise_is_euler_of_mean_generator() {
        let m = ReducedModel::new(&trap(12));
        let u = m.resonant(0.1, 0.5).unwrap();
        let s = ReducedState::new(coherent_density(12, C64::new(0.5, 0.0))).unwrap();
        let (next, current) = u.step(&s, 0.0, 1e-3).unwrap();
        let euler = s.matrix() + u.mean_apply(s.matrix()) * C64::new(1e-3, 0.0);
        assert!(max_abs_diff(next.matrix(), &euler) < 1e-12);
        let p = expect(m.ops().p.matrix(), s.matrix()).re;
        assert!((current - 2.0 * 0.5 * 0.1 * p).abs() < 1e-12);
    }

    #[test]
    fn innovation_preserves_trace_exactly() {
        let m = ReducedModel::new(&trap(12));
        let u = m.resonant(0.3, 1.0).unwrap();
        let s = ReducedState::new(coherent_density(12, C64::new(0.2, 0.4))).unwrap();
        let mut x = flatten(s.matrix());
        let mut scratch = StepScratch::new(12);
        let info = u.step_flat(&mut x, 0.05, 1e-3, &mut scratch).unwrap();
        assert!(info.trace_correction.abs() < 1e-14);
    }

    #[test]
    fn large_noise_trips_step_guard() {
        let m = ReducedModel::new(&trap(12));
        let u = m.resonant(50.0, 1.0).unwrap();
        let s = ReducedState::new(thermal_density(12, 0.2)).unwrap();
        // a huge increment pushes negative eigenvalues; the guard on the edge
        // band or on trace catches it before the state is used
        let r = u.step(&s, 5.0, 1e-3);
        assert!(r.is_err() || r.unwrap().0.matrix().trace().re > 0.0);
    }

    #[test]
    fn cutoff_guard_trips_on_edge_population() {
        let m = ReducedModel::new(&trap(10));
        let u = m.resonant(0.1, 1.0).unwrap();
        let s = ReducedState::new(fock_density(10, 9)).unwrap();
        assert!(matches!(u.step(&s, 0.0, 1e-3), Err(Error::Cutoff { .. })));
    }

    #[test]
    fn detuned_shift_matches_rate_set() {
        let m = ReducedModel::new(&trap(8));
        let meas = MeasurementParams::new(0.4, 0.3).unwrap();
        let mut s = 1u64;
        for _ in 0..20 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let dl = ((s >> 11) as f64 / (1u64 << 53) as f64) * 8.0 - 4.0;
            let sb = SidebandModel::new(1.0, 2.5, 3.0, dl, 0.01).unwrap();
            let u = m.detuned(&sb, &meas).unwrap();
            // −i(ν+δ)[n, |1⟩⟨0|] = −i(ν+δ)|1⟩⟨0|
            let x = CMat::from_fn(8, 8, |r, c| C64::new(if r == 1 && c == 0 { 1.0 } else { 0.0 }, 0.0));
            let y = u.generator().apply(&x);
            let rates = sb.rates(0.0, 0.4, 0.3).unwrap();
            let damping = (rates.a_minus + 3.0 * rates.a_plus) / 2.0;
            let want = C64::new(-damping, -(1.0 + rates.delta));
            assert!((y[(1, 0)] - want).norm() < 1e-12, "{} vs {}", y[(1, 0)], want);
            assert_eq!(rates.delta, sb.shift());
        }
    }

    #[test]
    fn jump_operator_reduces_to_momentum_readout() {
        // Δ_L = 0, ν ≪ Ω: Ĉ ≈ p̂ + (2νΓ/Ω²) ẑ
        let nu = 1e-3;
        let sb = SidebandModel::new(nu, 1.0, 1.0, 0.0, 1.0).unwrap();
        let t = TrapParams::new(nu, FockSpace::new(6).unwrap()).unwrap();
        let m = ReducedModel::new(&t);
        let c = m.jump_operator(&sb).to_dense();
        let want = m.ops().p.matrix() + m.ops().z.matrix() * C64::new(2.0 * nu, 0.0);
        assert!(max_abs_diff(&c, &want) < 1e-5);
    }

    #[test]
    fn pure_damping_relaxes_to_vacuum() {
        let m = ReducedModel::new(&trap(10));
        let sb = SidebandModel::new(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let meas = MeasurementParams::new(0.5, 0.0).unwrap();
        let mut b = SuperopBuilder::new(10);
        let rates = sb.rates(0.0, 0.5, 0.0).unwrap();
        b.hamiltonian(&scaled(m.number(), 1.0)).dissipator(rates.a_minus, m.a());
        let mu = b.build().steady_state().unwrap();
        assert!(max_abs_diff(&mu, &fock_density(10, 0)) < 1e-12);
        assert!(m.detuned(&sb, &meas).is_ok());
    }
}
