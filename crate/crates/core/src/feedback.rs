// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Direct feedback of the homodyne current onto the trap position.
//!
//! Per trajectory the feedback is the unitary `exp(−iθẑ)` with
//! `θ = (G/2ε) I_c dt`, applied right after the measurement update. Averaged
//! over the noise this produces the feedback master equations built here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{alpha_tilde, AngularQuadrature, FockSpace};
use crate::lambda::{check_epsilon, AtomParams, RateSet, SidebandModel};
use crate::ode::integrate_to_steady;
use crate::optimize::{minimize_bracketed, Minimum};
use crate::reduced::{scaled, scaled_c, ReducedModel, ReducedState};
use crate::superop::{flatten, unflatten, SparseOp, Superop, SuperopBuilder};
use crate::{CMat, C64};

/// Distribution tail dropped when a formula result is expanded into `p_n`.
const TAIL_TOL: f64 = 1e-12;
/// Longest distribution reported for formula results.
const MAX_LEVELS: usize = 4096;

/// Feedback gain. The delay is always the `τ → 0⁺` limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackParams {
    pub gain: f64,
}

impl FeedbackParams {
    pub fn new(gain: f64) -> Result<Self> {
        let f = FeedbackParams { gain };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0) || !self.gain.is_finite() {
            return Err(Error::invalid(
                "feedback.G",
                format!("gain must be finite and >= 0, got {}", self.gain),
            ));
        }
        Ok(())
    }
}

/// How a [`SteadyStateReport`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    RateEquation,
    GaussianFormula,
    OdeMoments,
    #[serde(rename = "numerical_ME")]
    NumericalMe,
}

/// Numerical route to the null vector of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Banded LU on the flattened generator.
    Direct,
    /// RK4 until the relative change rate drops below `1e-9`.
    Integrate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub nbar: f64,
    /// In units of `ħν`.
    pub energy: f64,
    /// Occupations `p_n`. Formula results report the geometric distribution
    /// with the same `n̄`.
    pub distribution: Vec<f64>,
    pub method: SteadyMethod,
}

impl SteadyStateReport {
    fn from_nbar(nbar: f64, method: SteadyMethod) -> Self {
        SteadyStateReport {
            nbar,
            energy: nbar + 0.5,
            distribution: geometric(nbar, None),
            method,
        }
    }

    fn from_density(mu: &CMat, method: SteadyMethod) -> Self {
        let distribution: Vec<f64> = (0..mu.nrows()).map(|k| mu[(k, k)].re.max(0.0)).collect();
        let total: f64 = distribution.iter().sum();
        let distribution: Vec<f64> = distribution.iter().map(|p| p / total).collect();
        let nbar = distribution
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum::<f64>();
        SteadyStateReport {
            nbar,
            energy: nbar + 0.5,
            distribution,
            method,
        }
    }
}

/// `p_n = (1 − r) r^n` with `r = n̄/(n̄+1)`, cut at `levels` (or where the tail
/// drops below `TAIL_TOL`, at most `MAX_LEVELS`), and renormalised.
fn geometric(nbar: f64, levels: Option<usize>) -> Vec<f64> {
    let r = nbar / (nbar + 1.0);
    let mut p = Vec::new();
    let mut v = 1.0 - r;
    let mut tail = 1.0;
    loop {
        p.push(v);
        tail -= v;
        v *= r;
        match levels {
            Some(n) if p.len() >= n => break,
            None if tail < TAIL_TOL || r == 0.0 || p.len() >= MAX_LEVELS => break,
            _ => {}
        }
    }
    let total: f64 = p.iter().sum();
    p.iter().map(|x| x / total).collect()
}

/// Rotation angle `θ = (G/2ε) I_c dt` of one feedback kick.
pub fn kick_angle(fb: &FeedbackParams, epsilon: f64, current: f64, dt: f64) -> f64 {
    fb.gain / (2.0 * epsilon) * current * dt
}

/// Applies `μ ↦ e^{−iθẑ} μ e^{iθẑ}` in place on flattened states.
#[derive(Debug, Clone)]
pub struct FeedbackKick {
    space: FockSpace,
    z: SparseOp,
    term: Vec<C64>,
    next: Vec<C64>,
}

impl FeedbackKick {
    pub fn new(model: &ReducedModel) -> Self {
        let n = model.space().dim();
        FeedbackKick {
            space: model.space().clone(),
            z: model.z().clone(),
            term: vec![C64::new(0.0, 0.0); n * n],
            next: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    /// Hermitian `x` in, Hermitian `x` out; trace is unchanged term by term.
    pub fn apply_flat(&mut self, x: &mut [C64], theta: f64) {
        if theta == 0.0 {
            return;
        }
        let n = self.space.dim();
        if theta.abs() * (2.0 * n as f64).sqrt() > 0.5 {
            self.apply_spectral(x, theta);
            return;
        }
        // Σ_k (−iθ)^k/k! ad_z^k(μ); every term is Hermitian
        self.term.copy_from_slice(x);
        for k in 1..64 {
            self.z.left_mul_flat(&self.term, &mut self.next);
            let c = C64::new(0.0, -theta / k as f64);
            let mut norm = 0.0f64;
            for m in 0..n {
                for q in m..n {
                    let v = c * (self.next[m * n + q] - self.next[q * n + m].conj());
                    let w = c * (self.next[q * n + m] - self.next[m * n + q].conj());
                    self.term[m * n + q] = v;
                    self.term[q * n + m] = w;
                    norm = norm.max(v.norm());
                }
            }
            for (d, t) in x.iter_mut().zip(&self.term) {
                *d += t;
            }
            if norm < 1e-15 {
                break;
            }
        }
    }

    fn apply_spectral(&mut self, x: &mut [C64], theta: f64) {
        let n = self.space.dim();
        let spec = self.space.z_spectrum();
        let v = &spec.vectors_c;
        let mu = unflatten(n, x);
        let mut t = v.transpose() * mu * v;
        for i in 0..n {
            for j in 0..n {
                t[(i, j)] *= C64::from_polar(1.0, -theta * (spec.values[i] - spec.values[j]));
            }
        }
        let out = v * t * v.transpose();
        x.copy_from_slice(&flatten(&out));
    }
}

/// Feedback applied to a matrix state after a current sample.
pub fn feedback_apply(
    model: &ReducedModel,
    state: &ReducedState,
    current: f64,
    fb: &FeedbackParams,
    epsilon: f64,
    dt: f64,
) -> Result<ReducedState> {
    fb.validate()?;
    check_epsilon(epsilon)?;
    let n = model.space().dim();
    let mut x = flatten(state.matrix());
    FeedbackKick::new(model).apply_flat(&mut x, kick_angle(fb, epsilon, current, dt));
    ReducedState::new(unflatten(n, &x))
}

/// `c[ẑ, Xμ + μX†]` added to `b`.
fn feedback_term(b: &mut SuperopBuilder, c: C64, z: &SparseOp, x: &SparseOp) {
    let xd = x.adjoint();
    let zx = SparseOp::from_dense(&(z.to_dense() * x.to_dense()));
    let xdz = SparseOp::from_dense(&(xd.to_dense() * z.to_dense()));
    b.sandwich(c, Some(&zx), None)
        .sandwich(c, Some(z), Some(&xd))
        .sandwich(-c, Some(x), Some(z))
        .sandwich(-c, None, Some(&xdz));
}

/// Resonant Lamb-Dicke feedback master equation:
/// `−iν[n̂,μ] − (Γ₀/2)[p̂,[p̂,μ]] − iΓ₀(G/2)[ẑ, p̂μ+μp̂] − Γ₀(G²/8ε)[ẑ,[ẑ,μ]]`.
pub fn resonant_generator(
    model: &ReducedModel,
    gamma0: f64,
    epsilon: f64,
    fb: &FeedbackParams,
) -> Result<Superop> {
    check_epsilon(epsilon)?;
    fb.validate()?;
    let mut b = SuperopBuilder::new(model.space().dim());
    b.hamiltonian(&scaled(model.number(), model.nu()))
        .double_commutator(C64::new(-gamma0 / 2.0, 0.0), model.p());
    add_feedback(&mut b, model, model.p(), gamma0, epsilon, fb);
    Ok(b.build())
}

fn add_feedback(
    b: &mut SuperopBuilder,
    model: &ReducedModel,
    x: &SparseOp,
    gamma0: f64,
    epsilon: f64,
    fb: &FeedbackParams,
) {
    let g = fb.gain;
    feedback_term(b, C64::new(0.0, -gamma0 * g / 2.0), model.z(), x);
    b.double_commutator(C64::new(-gamma0 * g * g / (8.0 * epsilon), 0.0), model.z());
}

/// Rate-equation form `(A₋+A₋^fb)D[â]μ + (A₊+A₊^fb)D[â†]μ` (frame rotating
/// at the trap frequency).
pub fn ld_general_generator(model: &ReducedModel, rates: &RateSet) -> Superop {
    let mut b = SuperopBuilder::new(model.space().dim());
    b.dissipator(rates.total_cooling(), model.a())
        .dissipator(rates.total_heating(), model.a_dag());
    b.build()
}

/// Feedback master equation before the rotating-wave approximation, with the
/// feedback acting through `Ĉe^{−iφ}`.
pub fn pre_rwa_generator(
    model: &ReducedModel,
    sideband: &SidebandModel,
    epsilon: f64,
    phi: f64,
    fb: &FeedbackParams,
) -> Result<Superop> {
    fb.validate()?;
    let rates = sideband.rates(0.0, epsilon, phi)?;
    let mut b = SuperopBuilder::new(model.space().dim());
    b.hamiltonian(&scaled(model.number(), model.nu() + rates.delta))
        .dissipator(rates.a_minus, model.a())
        .dissipator(rates.a_plus, model.a_dag());
    let c = scaled_c(&model.jump_operator(sideband), C64::from_polar(1.0, -phi));
    add_feedback(&mut b, model, &c, sideband.gamma0, epsilon, fb);
    Ok(b.build())
}

/// Null vector of `op`, checked against the truncation guard.
pub fn numerical_steady(op: &Superop, space: &FockSpace, solver: Solver, rate: f64) -> Result<CMat> {
    let mu = match solver {
        Solver::Direct => op.steady_state()?,
        Solver::Integrate => {
            let n = space.dim();
            let start = crate::hilbert::fock_density(n, 0);
            let h = 0.01 / op_scale(op).max(rate);
            integrate_to_steady(op, &start, h, rate, 1e-9, 1e6 / rate)?.0
        }
    };
    space.guard(&mu)?;
    Ok(mu)
}

/// Largest row sum of `|L|`, a bound on the fastest rate in the generator.
fn op_scale(op: &Superop) -> f64 {
    let n = op.dim();
    let mut x = vec![C64::new(0.0, 0.0); n * n];
    let mut y = x.clone();
    let mut best = 0.0f64;
    for k in 0..n.min(4) {
        x.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        x[k * n + k] = C64::new(1.0, 0.0);
        op.apply_vec(&x, &mut y);
        best = best.max(y.iter().map(|v| v.norm()).sum());
    }
    best
}

/// Steady state of the numerical master equation `op`.
pub fn numerical_report(op: &Superop, space: &FockSpace, solver: Solver, rate: f64) -> Result<SteadyStateReport> {
    let mu = numerical_steady(op, space, solver, rate)?;
    Ok(SteadyStateReport::from_density(&mu, SteadyMethod::NumericalMe))
}

/// Geometric solution of the occupation rate equation.
pub fn rate_equation_steady(rates: &RateSet, n_levels: usize) -> Result<SteadyStateReport> {
    let nbar = rates.nbar()?;
    Ok(SteadyStateReport {
        nbar,
        energy: nbar + 0.5,
        distribution: geometric(nbar, Some(n_levels.max(1))),
        method: SteadyMethod::RateEquation,
    })
}

/// Closed-form steady energy `(1/2)(GΓ₀²/2ν² + 1/G + G/4ε)` in units of `ħν`.
pub fn gaussian_steady_energy(gain: f64, gamma0: f64, nu: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::invalid("feedback.G", "the Gaussian formula needs G > 0"));
    }
    Ok(0.5 * (gain * gamma0 * gamma0 / (2.0 * nu * nu) + 1.0 / gain + gain / (4.0 * epsilon)))
}

/// Gain `√(4ε)` that minimises the Gaussian energy when `Γ₀ ≪ ν`.
pub fn gaussian_optimal_gain(epsilon: f64) -> f64 {
    (4.0 * epsilon).sqrt()
}

pub fn gaussian_report(gain: f64, gamma0: f64, nu: f64, epsilon: f64) -> Result<SteadyStateReport> {
    let e = gaussian_steady_energy(gain, gamma0, nu, epsilon)?;
    Ok(SteadyStateReport::from_nbar(e - 0.5, SteadyMethod::GaussianFormula))
}

/// Recoil heating constant `D`.
pub fn recoil_diffusion(atom: &AtomParams, quad: &AngularQuadrature) -> Result<f64> {
    if atom.gamma_r >= atom.gamma_g {
        return Err(Error::invalid(
            "atom.gamma_r",
            "the recoil series needs Gamma_r < Gamma_g",
        ));
    }
    let a = alpha_tilde(quad);
    let (gg, gr) = (atom.gamma_g, atom.gamma_r);
    let (eg, er) = (atom.eta_g, atom.eta_r);
    Ok(eg * eg * a
        + gr / atom.gamma * (gg / (gg - gr) * (er * er * a + er * eg) + gr / (gg - gr) * er * er))
}

/// Beyond-Lamb-Dicke occupation and optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeyondLdResult {
    pub d: f64,
    pub report: SteadyStateReport,
    /// Gain minimising the energy, `D + √(4ε + D²)`.
    pub optimal_gain: f64,
    /// Minimal energy `(D + √(4ε + D²))/4ε` in units of `ħν`.
    pub min_energy: f64,
    /// Recoil-dominated estimate `(ᾱ/ε)E_R` with `E_R = η_g²/2`.
    pub recoil_limit: f64,
}

/// `n̄ = (G²/4ε − G + 1 + D)/(2(G − D))` from the moment equation.
pub fn beyond_ld_steady(
    atom: &AtomParams,
    epsilon: f64,
    fb: &FeedbackParams,
    quad: &AngularQuadrature,
) -> Result<BeyondLdResult> {
    check_epsilon(epsilon)?;
    fb.validate()?;
    let d = recoil_diffusion(atom, quad)?;
    let g = fb.gain;
    if g <= d {
        return Err(Error::NoSteadyState { damping: g - d });
    }
    let nbar = (g * g / (4.0 * epsilon) - g + 1.0 + d) / (2.0 * (g - d));
    let root = (4.0 * epsilon + d * d).sqrt();
    Ok(BeyondLdResult {
        d,
        report: SteadyStateReport::from_nbar(nbar, SteadyMethod::OdeMoments),
        optimal_gain: d + root,
        min_energy: (d + root) / (4.0 * epsilon),
        recoil_limit: alpha_tilde(quad) / epsilon * atom.eta_g * atom.eta_g / 2.0,
    })
}

/// Golden-section minimum of `objective` on `[lo, hi]`; relative tolerance
/// `1e-6`. Errors in the objective count as `+∞`.
pub fn optimize_gain(objective: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Minimum {
    optimize_gain_with(objective, lo, hi, 1e-6)
}

pub fn optimize_gain_with(
    objective: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Minimum {
    minimize_bracketed(|g| objective(g).unwrap_or(f64::INFINITY), lo, hi, 16, tol)
}
