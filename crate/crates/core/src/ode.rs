// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-step classical Runge–Kutta integration of linear master equations.

use crate::error::{Error, Result};
use crate::superop::{flatten, unflatten, Superop};
use crate::{CMat, C64};

/// Scratch buffers for [`Rk4`] stepping of a flattened state.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Rk4 {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    pub fn step(&mut self, op: &Superop, x: &mut [C64], dt: f64) {
        let h = dt;
        op.apply_vec(x, &mut self.k1);
        axpy(&mut self.tmp, x, &self.k1, h / 2.0);
        op.apply_vec(&self.tmp, &mut self.k2);
        axpy(&mut self.tmp, x, &self.k2, h / 2.0);
        op.apply_vec(&self.tmp, &mut self.k3);
        axpy(&mut self.tmp, x, &self.k3, h);
        op.apply_vec(&self.tmp, &mut self.k4);
        for i in 0..x.len() {
            x[i] += (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]) * (h / 6.0);
        }
    }

    /// The derivative evaluated by the most recent [`Rk4::step`] at its start.
    pub fn last_derivative(&self) -> &[C64] {
        &self.k1
    }
}

fn axpy(out: &mut [C64], x: &[C64], k: &[C64], h: f64) {
    for ((o, &a), &b) in out.iter_mut().zip(x).zip(k) {
        *o = a + b * h;
    }
}

/// Number of equal steps of length at most `h_max` covering `t`.
pub fn step_count(t: f64, h_max: f64) -> usize {
    ((t / h_max).ceil() as usize).max(1)
}

/// Evolves `mu` for time `t` with steps no longer than `h_max`.
pub fn evolve(op: &Superop, mu: &CMat, t: f64, h_max: f64) -> CMat {
    let steps = step_count(t, h_max);
    let h = t / steps as f64;
    let mut x = flatten(mu);
    let mut rk = Rk4::new(x.len());
    for _ in 0..steps {
        rk.step(op, &mut x, h);
    }
    unflatten(op.dim(), &x)
}

/// States at each of `times` (ascending, starting from `t = 0`), stepping with
/// at most `h_max` between consecutive times.
pub fn evolve_checkpoints(op: &Superop, mu: &CMat, times: &[f64], h_max: f64) -> Vec<CMat> {
    let mut x = flatten(mu);
    let mut rk = Rk4::new(x.len());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = step_count(span, h_max);
            let h = span / steps as f64;
            for _ in 0..steps {
                rk.step(op, &mut x, h);
            }
        }
        t = target.max(t);
        out.push(unflatten(op.dim(), &x));
    }
    out
}

/// One RK4 step of `dμ/dt = f(μ)` for generators not assembled as a
/// [`Superop`].
pub fn rk4_closure(f: impl Fn(&CMat) -> CMat, mu: &CMat, h: f64) -> CMat {
    let half = C64::new(h / 2.0, 0.0);
    let k1 = f(mu);
    let k2 = f(&(mu + &k1 * half));
    let k3 = f(&(mu + &k2 * half));
    let k4 = f(&(mu + &k3 * C64::new(h, 0.0)));
    mu + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

/// Long-time integration until `‖μ̇‖ / (rate ‖μ‖) < tol` (max-norm), where
/// `rate` is the frequency scale that sets the stopping rule.
pub fn integrate_to_steady(
    op: &Superop,
    mu: &CMat,
    h: f64,
    rate: f64,
    tol: f64,
    max_time: f64,
) -> Result<(CMat, f64)> {
    let mut x = flatten(mu);
    let mut rk = Rk4::new(x.len());
    let check_every = step_count(1.0 / rate, h).max(1);
    let max_steps = step_count(max_time, h);
    let mut deriv = vec![C64::new(0.0, 0.0); x.len()];
    for step in 1..=max_steps {
        rk.step(op, &mut x, h);
        if step % check_every == 0 {
            op.apply_vec(&x, &mut deriv);
            let d = deriv.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let m = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if !d.is_finite() {
                return Err(Error::Singular("integration diverged".into()));
            }
            if d / (rate * m) < tol {
                return Ok((unflatten(op.dim(), &x), step as f64 * h));
            }
        }
    }
    Err(Error::Singular(format!(
        "no convergence to a steady state within t = {max_time}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fock_density, ladder_ops, FockSpace};
    use crate::superop::{SparseOp, SuperopBuilder};

    #[test]
    fn pure_decay_matches_exponential() {
        let space = FockSpace::new(6).unwrap();
        let ops = ladder_ops(&space);
        let mut b = SuperopBuilder::new(6);
        b.dissipator(1.0, &SparseOp::from_dense(ops.a.matrix()));
        let l = b.build();
        let mu = evolve(&l, &fock_density(6, 1), 2.0, 0.01);
        assert!((mu[(1, 1)].re - (-2.0f64).exp()).abs() < 1e-9);
        assert!((mu.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_convergence() {
        let mut b = SuperopBuilder::new(2);
        let h = CMat::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        );
        b.hamiltonian(&SparseOp::from_dense(&h));
        let l = b.build();
        let rho = fock_density(2, 0);
        let exact = 1.0f64.cos().powi(2);
        let e1 = (evolve(&l, &rho, 1.0, 0.1)[(0, 0)].re - exact).abs();
        let e2 = (evolve(&l, &rho, 1.0, 0.05)[(0, 0)].re - exact).abs();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn checkpoints_agree_with_direct_evolution() {
        let space = FockSpace::new(5).unwrap();
        let ops = ladder_ops(&space);
        let mut b = SuperopBuilder::new(5);
        b.dissipator(0.3, &SparseOp::from_dense(ops.a.matrix()))
            .hamiltonian(&SparseOp::from_dense(ops.z.matrix()));
        let l = b.build();
        let rho = fock_density(5, 2);
        let cps = evolve_checkpoints(&l, &rho, &[0.0, 0.5, 1.5], 0.01);
        assert_eq!(cps[0], rho);
        let direct = evolve(&l, &rho, 1.5, 0.01);
        assert!((&cps[2] - &direct).iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn closure_step_matches_superop_step() {
        let space = FockSpace::new(5).unwrap();
        let ops = ladder_ops(&space);
        let mut b = SuperopBuilder::new(5);
        b.dissipator(0.3, &SparseOp::from_dense(ops.a.matrix()));
        let l = b.build();
        let rho = fock_density(5, 3);
        let a = rk4_closure(|m| l.apply(m), &rho, 0.1);
        let c = evolve(&l, &rho, 0.1, 0.1);
        assert!((&a - &c).iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn steady_integration_agrees_with_direct_solve() {
        let space = FockSpace::new(12).unwrap();
        let ops = ladder_ops(&space);
        let mut b = SuperopBuilder::new(12);
        b.hamiltonian(&SparseOp::from_dense(ops.n.matrix()))
            .dissipator(1.2, &SparseOp::from_dense(ops.a.matrix()))
            .dissipator(0.2, &SparseOp::from_dense(ops.a_dag.matrix()));
        let l = b.build();
        let (mu, _) = integrate_to_steady(&l, &fock_density(12, 0), 0.01, 1.0, 1e-9, 500.0).unwrap();
        let direct = l.steady_state().unwrap();
        assert!((&mu - &direct).iter().all(|v| v.norm() < 1e-7));
    }
}
