// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Internal-state analytics of the driven Λ system.
//!
//! Levels are ordered `(g, r, e)`: probe ground state, dressing ground state,
//! excited state. All frequencies share one unit (the ingestion layer picks
//! it); nothing here converts units.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{minimize_periodic, Minimum};
use crate::C64;

/// Probe Rabi frequency above which the weak-probe assumption is flagged.
pub const WEAK_PROBE_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// Total decay rate of `|e⟩`.
    pub gamma: f64,
    /// Branching rate `|e⟩ → |g⟩`.
    pub gamma_g: f64,
    /// Branching rate `|e⟩ → |r⟩`.
    pub gamma_r: f64,
    /// Dressing Rabi frequency on `|r⟩ ↔ |e⟩`.
    pub omega_l: f64,
    /// Probe Rabi frequency on `|g⟩ ↔ |e⟩`.
    pub g: f64,
    pub delta_p: f64,
    pub delta_l: f64,
    /// Lamb-Dicke parameter of the probe beam.
    pub eta_g: f64,
    /// Lamb-Dicke parameter of the dressing beam.
    pub eta_r: f64,
}

impl AtomParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("gamma", self.gamma),
            ("gamma_g", self.gamma_g),
            ("gamma_r", self.gamma_r),
            ("omega_l", self.omega_l),
            ("g", self.g),
            ("delta_p", self.delta_p),
            ("delta_l", self.delta_l),
            ("eta_g", self.eta_g),
            ("eta_r", self.eta_r),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.gamma <= 0.0 {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if self.gamma_g < 0.0 {
            return Err(Error::invalid("gamma_g", "must be non-negative"));
        }
        if self.gamma_r < 0.0 {
            return Err(Error::invalid("gamma_r", "must be non-negative"));
        }
        if (self.gamma_g + self.gamma_r - self.gamma).abs() > 1e-12 * self.gamma.max(1.0) {
            return Err(Error::invalid(
                "gamma_g",
                format!(
                    "branching rates must sum to gamma: {} + {} != {}",
                    self.gamma_g, self.gamma_r, self.gamma
                ),
            ));
        }
        Ok(())
    }

    /// `g ≤ 0.2 Ω_L`. Violations are reported, not rejected.
    pub fn is_weak_probe(&self) -> bool {
        self.g.abs() <= WEAK_PROBE_RATIO * self.omega_l.abs()
    }

    /// `Ω = √(Ω_L² + g²)`.
    pub fn omega(&self) -> f64 {
        self.omega_l.hypot(self.g)
    }

    /// Probe detuning that puts `|p = 0, D⟩` at the two-photon resonance in
    /// the moving frame, `Δ_L + ν η̄²/2`.
    pub fn dark_resonance_delta_p(&self, nu: f64) -> f64 {
        let eta_bar = self.eta_g - self.eta_r;
        self.delta_l + nu * eta_bar * eta_bar / 2.0
    }
}

/// Dressed-state quantities derived from [`AtomParams`] and the trap frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedAtom {
    pub omega: f64,
    pub eta_bar: f64,
    /// Mixing angle, `tan θ = Ω / (√(Ω² + Δ²) − Δ)`.
    pub theta: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// Coupling scale `2 g η̄ ν / Ω²`.
    pub lambda: f64,
    /// Alternate form `2 g η̄ ν Ω_L / Ω³`; equal to `lambda` for a weak probe.
    pub lambda_alt: f64,
    /// Measurement rate `λ² Γ`.
    pub gamma0: f64,
    /// Recoil-shifted detuning `Δ_p − ν η_g²/2`.
    pub delta: f64,
    pub dark: Vector3<f64>,
    pub plus: Vector3<f64>,
    pub minus: Vector3<f64>,
    pub weak_probe: bool,
}

/// Dark and bright states of the internal Hamiltonian
/// `H_I = −Δ|e⟩⟨e| + (Ω_L/2)(σ_er + σ_re) + (g/2)(σ_eg + σ_ge)`.
pub fn dressed_states(params: &AtomParams, nu: f64) -> Result<DerivedAtom> {
    params.validate()?;
    let omega = params.omega();
    if omega == 0.0 {
        return Err(Error::invalid("omega_l", "Ω = √(Ω_L² + g²) must be nonzero"));
    }
    let delta = params.delta_p - nu * params.eta_g * params.eta_g / 2.0;
    let root = omega.hypot(delta);
    let theta = omega.atan2(root - delta);
    let omega_plus = (root - delta) / 2.0;
    let omega_minus = -(root + delta) / 2.0;
    let eta_bar = params.eta_g - params.eta_r;
    let lambda = 2.0 * params.g * eta_bar * nu / (omega * omega);
    let lambda_alt = lambda * params.omega_l / omega;

    let (c, s) = (theta.cos(), theta.sin());
    let bright = Vector3::new(params.g, params.omega_l, 0.0) / omega;
    let excited = Vector3::new(0.0, 0.0, 1.0);
    let dark = Vector3::new(-params.omega_l, params.g, 0.0) / omega;
    let plus = excited * c + bright * s;
    let minus = excited * s - bright * c;

    Ok(DerivedAtom {
        omega,
        eta_bar,
        theta,
        omega_plus,
        omega_minus,
        lambda,
        lambda_alt,
        gamma0: lambda * lambda * params.gamma,
        delta,
        dark,
        plus,
        minus,
        weak_probe: params.is_weak_probe(),
    })
}

/// Linear probe susceptibility `iΔ_p / (|Ω_L|²/4 + iΔ_p(Γ + iΔ_p))`.
///
/// The printed proportionality is kept verbatim; with it the real part is even
/// in `Δ_p` and the imaginary part odd.
pub fn susceptibility(delta_p: f64, omega_l: f64, gamma: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let d = C64::new(delta_p, 0.0);
    i * d / (omega_l * omega_l / 4.0 + i * d * (gamma + i * d))
}

/// Sideband response `I(ν) = Ω⁴/(2Γν²) · iν / ((Ω² − 4ν(ν − Δ_L)) + 2iΓν)`.
pub fn i_closed(nu: f64, delta_l: f64, omega: f64, gamma: f64) -> Result<C64> {
    if nu == 0.0 {
        return Err(Error::invalid("nu", "I(ν) is evaluated at ν ≠ 0"));
    }
    let o2 = omega * omega;
    let den = C64::new(o2 - 4.0 * nu * (nu - delta_l), 2.0 * gamma * nu);
    Ok(C64::new(0.0, nu) * (o2 * o2 / (2.0 * gamma * nu * nu)) / den)
}

/// Sideband response from the bright-state resolvent:
/// `Ĩ(ν) = vᵀ (M + iν)⁻¹ v` with `v = (cos θ, sin θ)`, rescaled by `Ω⁴/(8ν²Γ)`.
pub fn i_resolvent(nu: f64, delta: f64, omega: f64, gamma: f64) -> Result<C64> {
    if nu == 0.0 {
        return Err(Error::invalid("nu", "I(ν) is evaluated at ν ≠ 0"));
    }
    if omega == 0.0 {
        return Err(Error::invalid("omega", "must be nonzero"));
    }
    let root = omega.hypot(delta);
    let theta = omega.atan2(root - delta);
    let omega_plus = (root - delta) / 2.0;
    let omega_minus = -(root + delta) / 2.0;
    let (c, s) = (theta.cos(), theta.sin());
    let i = C64::new(0.0, 1.0);
    let off = C64::new(gamma / 4.0 * (2.0 * theta).sin(), 0.0);
    let m11 = i * omega_plus + gamma / 2.0 * c * c + i * nu;
    let m22 = i * omega_minus + gamma / 2.0 * s * s + i * nu;
    let det = m11 * m22 - off * off;
    if det.norm() < 1e-300 {
        return Err(Error::Singular("M + iν is not invertible".into()));
    }
    // vᵀ adj(M + iν) v / det
    let quad = (m22 * c * c - off * 2.0 * c * s + m11 * s * s) / det;
    Ok(quad * (omega.powi(4) / (8.0 * nu * nu * gamma)))
}

/// Scalar cooling and heating rates of combined feedback and EIT cooling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub a_minus: f64,
    pub a_plus: f64,
    pub a_minus_fb: f64,
    pub a_plus_fb: f64,
    /// Trap-frequency shift `δ`.
    pub delta: f64,
    /// Net damping `A₋ + A₋^fb − A₊ − A₊^fb`.
    pub w: f64,
    pub gamma0: f64,
}

impl RateSet {
    pub fn total_cooling(&self) -> f64 {
        self.a_minus + self.a_minus_fb
    }

    pub fn total_heating(&self) -> f64 {
        self.a_plus + self.a_plus_fb
    }

    /// Whether the net damping is positive beyond rounding of the rates.
    pub fn has_steady_state(&self) -> bool {
        let scale = self.total_cooling().abs() + self.total_heating().abs();
        self.w > 1e-12 * scale
    }

    /// Mean occupation `(A₊ + A₊^fb)/W` of the Bose–Einstein steady state.
    pub fn nbar(&self) -> Result<f64> {
        if !self.has_steady_state() {
            return Err(Error::NoSteadyState { damping: self.w });
        }
        Ok(self.total_heating() / self.w)
    }
}

/// Lamb-Dicke sideband model: everything the rate set and the jump operator
/// `Ĉ` need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandModel {
    pub nu: f64,
    pub omega: f64,
    pub gamma: f64,
    pub delta_l: f64,
    pub gamma0: f64,
}

impl SidebandModel {
    pub fn new(nu: f64, omega: f64, gamma: f64, delta_l: f64, gamma0: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::invalid("nu", "trap frequency must be positive"));
        }
        if !(gamma > 0.0) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::invalid("omega_l", "Ω must be nonzero and finite"));
        }
        if !(gamma0 >= 0.0) {
            return Err(Error::invalid("gamma0", "must be non-negative"));
        }
        Ok(SidebandModel {
            nu,
            omega,
            gamma,
            delta_l,
            gamma0,
        })
    }

    /// Model with `Γ₀ = λ²Γ` and `Ω` taken from the atom.
    pub fn from_atom(atom: &AtomParams, nu: f64) -> Result<Self> {
        let d = dressed_states(atom, nu)?;
        Self::new(nu, d.omega, atom.gamma, atom.delta_l, d.gamma0)
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Self {
        self.gamma0 = gamma0;
        self
    }

    pub fn with_delta_l(mut self, delta_l: f64) -> Self {
        self.delta_l = delta_l;
        self
    }

    /// `(I(+ν), I(−ν))`.
    pub fn response(&self) -> (C64, C64) {
        let ip = i_closed(self.nu, self.delta_l, self.omega, self.gamma).expect("nu > 0");
        let im = i_closed(-self.nu, self.delta_l, self.omega, self.gamma).expect("nu > 0");
        (ip, im)
    }

    /// Coefficients `(c_a, c_a†)` of `Ĉ = c_a â + c_a† â†`.
    pub fn jump_coefficients(&self) -> (C64, C64) {
        let (ip, im) = self.response();
        let pre = std::f64::consts::SQRT_2 * self.nu * self.gamma / (self.omega * self.omega);
        (im * pre, ip * pre)
    }

    /// Trap-frequency shift `δ = Γ₀ Im[I(−ν) + I(ν)]/4`.
    pub fn shift(&self) -> f64 {
        let (ip, im) = self.response();
        self.gamma0 * (ip + im).im / 4.0
    }

    pub fn rates(&self, gain: f64, epsilon: f64, phi: f64) -> Result<RateSet> {
        check_epsilon(epsilon)?;
        if !(gain >= 0.0) || !gain.is_finite() {
            return Err(Error::invalid("G", "feedback gain must be finite and >= 0"));
        }
        let (ip, im) = self.response();
        let g0 = self.gamma0;
        let a_plus = g0 / 2.0 * ip.re;
        let a_minus = g0 / 2.0 * im.re;
        let k = self.nu * self.gamma / (self.omega * self.omega);
        let lo = C64::from_polar(1.0, phi);
        let noise = gain * gain / (8.0 * epsilon);
        let a_plus_fb = g0 * (gain * k * (ip.conj() * lo).im + noise);
        let a_minus_fb = g0 * (gain * k * (im.conj() * lo).im + noise);
        Ok(RateSet {
            a_minus,
            a_plus,
            a_minus_fb,
            a_plus_fb,
            delta: g0 * (im + ip).im / 4.0,
            w: a_minus + a_minus_fb - a_plus - a_plus_fb,
            gamma0: g0,
        })
    }

    /// Local-oscillator phase minimising `n̄` at fixed gain. When no phase gives
    /// positive damping the phase maximising `W` is returned instead.
    pub fn optimize_phase(&self, gain: f64, epsilon: f64) -> Result<(f64, RateSet)> {
        check_epsilon(epsilon)?;
        let nbar_at = |phi: f64| {
            self.rates(gain, epsilon, phi)
                .ok()
                .and_then(|r| r.nbar().ok())
                .unwrap_or(f64::INFINITY)
        };
        let best: Minimum = minimize_periodic(nbar_at, TAU, 64, 1e-6);
        let phi = if best.value.is_finite() {
            best.x
        } else {
            minimize_periodic(
                |phi| {
                    self.rates(gain, epsilon, phi)
                        .map(|r| -r.w)
                        .unwrap_or(f64::INFINITY)
                },
                TAU,
                64,
                1e-9,
            )
            .x
        };
        Ok((phi, self.rates(gain, epsilon, phi)?))
    }
}

/// [`RateSet`] for `atom` with `Γ₀ = λ²Γ` derived from the atom.
pub fn rate_set(atom: &AtomParams, nu: f64, gain: f64, epsilon: f64, phi: f64) -> Result<RateSet> {
    SidebandModel::from_atom(atom, nu)?.rates(gain, epsilon, phi)
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(
            "epsilon",
            format!("collection efficiency must lie in (0, 1], got {epsilon}"),
        ));
    }
    Ok(())
}
