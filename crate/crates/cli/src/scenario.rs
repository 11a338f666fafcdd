// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario orchestration: each mode turns a [`ScenarioConfig`] into tables.

use std::f64::consts::TAU;

use eitlab_core::elimination::{compare_elimination, EliminationSample};
use eitlab_core::feedback::{
    beyond_ld_steady, gaussian_report, gaussian_steady_energy, ld_general_generator, numerical_report,
    optimize_gain, optimize_gain_with, pre_rwa_generator, rate_equation_steady, recoil_diffusion,
    resonant_generator,
};
use eitlab_core::hilbert::{coherent_density, fock_density, thermal_density};
use eitlab_core::lambda::{RateSet, SidebandModel};
use eitlab_core::ode::evolve_checkpoints;
use eitlab_core::sde::{run_ensemble, ReducedTrajectory, REDUCED_OBSERVABLES};
use eitlab_core::superop::Superop;
use eitlab_core::{CMat, Error, FeedbackParams, ReducedModel, SteadyStateReport, C64};
use rayon::prelude::*;

use crate::config::{Form, Initial, Mode, ScenarioConfig, Setting};
use crate::error::CliError;
use crate::table::{col, num, Cell, Plot, Table};

/// Relative tolerance of numerical gain searches.
const GAIN_TOL: f64 = 1e-4;

type Res<T> = Result<T, CliError>;

fn lambda_atom(e: Error) -> CliError {
    CliError::module("lambda-atom")(e)
}

fn feedback_engine(e: Error) -> CliError {
    CliError::module("feedback-engine")(e)
}

/// Status string for errors that mark a row instead of aborting the run.
fn row_status(e: &Error) -> Option<&'static str> {
    match e {
        Error::NoSteadyState { .. } => Some("no_steady_state"),
        Error::Cutoff { .. } => Some("cutoff"),
        _ => None,
    }
}

/// `Ok(None)` with a status for recoverable row errors.
fn soft<T>(r: Result<T, Error>, module: &'static str) -> Res<(Option<T>, &'static str)> {
    match r {
        Ok(v) => Ok((Some(v), "ok")),
        Err(e) => match row_status(&e) {
            Some(s) => Ok((None, s)),
            None => Err(CliError::module(module)(e)),
        },
    }
}

fn worst(a: &'static str, b: &'static str) -> &'static str {
    let rank = |s| match s {
        "no_steady_state" => 2,
        "cutoff" => 1,
        _ => 0,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

pub fn run_scenario(c: &ScenarioConfig) -> Res<Vec<Table>> {
    match c.run.mode {
        Mode::Rates => rates(c),
        Mode::Steady => steady(c),
        Mode::SweepGain => sweep_gain(c),
        Mode::SweepDetuning => sweep_detuning(c),
        Mode::Trajectory => trajectory(c),
        Mode::ValidateElimination => validate_elimination(c),
        Mode::Fig3 => fig3(c),
        Mode::Fig5 => fig5(c),
        Mode::Fig6 => fig6(c),
    }
}

// --- shared pieces ---------------------------------------------------------

fn positive_gamma0(c: &ScenarioConfig, delta_l: f64) -> Res<f64> {
    let g0 = c.gamma0(delta_l)?;
    if !(g0 > 0.0) {
        return Err(CliError::Physics {
            field: "measurement.gamma0".into(),
            message: "the atom gives no measurement rate (g = 0 or eta_g = eta_r); set gamma0".into(),
        });
    }
    Ok(g0)
}

fn sideband(c: &ScenarioConfig, delta_l: f64) -> Res<SidebandModel> {
    let atom = c.atom.params(c.trap.nu, delta_l);
    let sb = SidebandModel::from_atom(&atom, c.trap.nu).map_err(lambda_atom)?;
    Ok(sb.with_gamma0(positive_gamma0(c, delta_l)?))
}

fn model(c: &ScenarioConfig, cutoff: usize) -> Res<ReducedModel> {
    Ok(ReducedModel::new(&c.trap.params(cutoff)?))
}

/// Gain, phase and rates of one detuning point, with the configured gain and
/// phase either fixed or optimised for the lowest `n̄`.
#[derive(Debug, Clone, Copy)]
struct RatePoint {
    gain: f64,
    phi: f64,
    rates: RateSet,
}

impl RatePoint {
    fn nbar(&self) -> Option<f64> {
        self.rates.nbar().ok()
    }
}

fn rates_at(sb: &SidebandModel, phi: Setting, gain: f64, eps: f64) -> Result<(f64, RateSet), Error> {
    match phi.value() {
        Some(p) => Ok((p, sb.rates(gain, eps, p)?)),
        None => sb.optimize_phase(gain, eps),
    }
}

fn rate_point(c: &ScenarioConfig, sb: &SidebandModel, gain: Setting, eps: f64) -> Res<RatePoint> {
    let phi = c.measurement.phi;
    let gain = match gain.value() {
        Some(g) => g,
        None => {
            let [lo, hi] = c.feedback.gain_range;
            optimize_gain(|g| rates_at(sb, phi, g, eps).and_then(|(_, r)| r.nbar()), lo, hi).x
        }
    };
    let (phi, rates) = rates_at(sb, phi, gain, eps).map_err(lambda_atom)?;
    Ok(RatePoint { gain, phi, rates })
}

/// Minimiser of the Gaussian energy including the `Γ₀²` term.
fn gaussian_best_gain(gamma0: f64, nu: f64, eps: f64) -> f64 {
    1.0 / (gamma0 * gamma0 / (2.0 * nu * nu) + 1.0 / (4.0 * eps)).sqrt()
}

fn fixed_gain(c: &ScenarioConfig) -> Option<f64> {
    c.feedback.gain.value()
}

/// Numerical steady state of the resonant feedback equation.
fn resonant_numeric(c: &ScenarioConfig, gamma0: f64, eps: f64, gain: f64) -> Res<(Option<SteadyStateReport>, &'static str, usize)> {
    let estimate = gaussian_steady_energy(gain.max(1e-6), gamma0, c.trap.nu, eps).map_err(feedback_engine)? - 0.5;
    let n = c.trap.cutoff_for(estimate);
    let m = model(c, n)?;
    let fb = FeedbackParams::new(gain).map_err(feedback_engine)?;
    let op = resonant_generator(&m, gamma0, eps, &fb).map_err(feedback_engine)?;
    let rate = gamma0 * gain.max(1e-3);
    let (r, s) = soft(numerical_report(&op, m.space(), c.run.solver, rate), "feedback-engine")?;
    Ok((r, s, n))
}

fn rate_numeric(c: &ScenarioConfig, sb: &SidebandModel, p: &RatePoint, eps: f64) -> Res<(Option<SteadyStateReport>, &'static str, usize)> {
    let Some(nbar) = p.nbar() else {
        return Ok((None, "no_steady_state", 0));
    };
    let n = c.trap.cutoff_for(nbar);
    let m = model(c, n)?;
    let op: Superop = match c.run.form {
        Form::PreRwa => {
            let fb = FeedbackParams::new(p.gain).map_err(feedback_engine)?;
            pre_rwa_generator(&m, sb, eps, p.phi, &fb).map_err(feedback_engine)?
        }
        _ => ld_general_generator(&m, &p.rates),
    };
    let (r, s) = soft(numerical_report(&op, m.space(), c.run.solver, p.rates.w), "feedback-engine")?;
    Ok((r, s, n))
}

fn initial_state(initial: &Initial, n: usize) -> CMat {
    match initial {
        Initial::Vacuum => fock_density(n, 0),
        Initial::Thermal(nbar) => thermal_density(n, *nbar),
        Initial::Coherent([re, im]) => coherent_density(n, C64::new(*re, *im)),
        Initial::Fock(k) => fock_density(n, *k),
    }
}

fn initial_occupation(initial: &Initial) -> f64 {
    match initial {
        Initial::Vacuum => 0.0,
        Initial::Thermal(nbar) => *nbar,
        Initial::Coherent([re, im]) => re * re + im * im,
        Initial::Fock(k) => *k as f64,
    }
}

// --- rates and detuning sweeps ---------------------------------------------

fn rate_columns(first: Vec<crate::table::Column>) -> Vec<crate::table::Column> {
    let mut cols = first;
    cols.extend([
        col("G", "1", "feedback gain"),
        col("phi", "rad", "local oscillator phase"),
        col("A_minus", "Gamma0", "EIT cooling rate"),
        col("A_plus", "Gamma0", "EIT heating rate"),
        col("A_minus_fb", "Gamma0", "feedback cooling rate"),
        col("A_plus_fb", "Gamma0", "feedback heating rate"),
        col("delta", "Gamma0", "trap frequency shift"),
        col("W", "Gamma0", "net damping"),
        col("nbar", "1", "steady mean occupation"),
        col("energy", "hbar nu", "steady energy nbar + 1/2"),
        col("status", "", "ok | no_steady_state"),
    ]);
    cols
}

fn rate_cells(p: &RatePoint) -> Vec<Cell> {
    let r = &p.rates;
    let g0 = r.gamma0;
    let nbar = p.nbar();
    vec![
        Cell::Num(p.gain),
        Cell::Num(p.phi),
        Cell::Num(r.a_minus / g0),
        Cell::Num(r.a_plus / g0),
        Cell::Num(r.a_minus_fb / g0),
        Cell::Num(r.a_plus_fb / g0),
        Cell::Num(r.delta / g0),
        Cell::Num(r.w / g0),
        Cell::opt(nbar),
        Cell::opt(nbar.map(|n| n + 0.5)),
        Cell::text(if nbar.is_some() { "ok" } else { "no_steady_state" }),
    ]
}

fn rates(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let dl = c.atom.delta_l;
    let sb = sideband(c, dl)?;
    let p = rate_point(c, &sb, c.feedback.gain, c.measurement.epsilon)?;
    let mut t = Table::new(
        "rates",
        rate_columns(vec![
            col("delta_l_over_gamma", "Gamma", "dressing laser detuning"),
            col("gamma0", "base", "measurement rate"),
        ]),
    );
    let mut row = vec![Cell::Num(dl / c.atom.gamma), Cell::Num(sb.gamma0)];
    row.extend(rate_cells(&p));
    t.push(row);
    Ok(vec![t])
}

fn detuning_table(c: &ScenarioConfig, name: &str, gain: Setting, eps: f64) -> Res<Table> {
    let gamma = c.atom.gamma;
    let grid = c.run.sweep.values();
    let points: Vec<RatePoint> = grid
        .par_iter()
        .map(|&x| rate_point(c, &sideband(c, x * gamma)?, gain, eps))
        .collect::<Res<_>>()?;
    let mut t = Table::new(
        name,
        rate_columns(vec![col("delta_l_over_gamma", "Gamma", "dressing laser detuning")]),
    );
    for (x, p) in grid.iter().zip(&points) {
        let mut row = vec![Cell::Num(*x)];
        row.extend(rate_cells(p));
        t.push(row);
    }
    Ok(t)
}

fn sweep_detuning(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let mut t = detuning_table(c, "sweep_detuning", c.feedback.gain, c.measurement.epsilon)?;
    t.plot = Some(Plot {
        x: "delta_l_over_gamma".into(),
        ys: vec!["nbar".into()],
        y_label: "nbar".into(),
        log_y: true,
        group: None,
    });
    Ok(vec![t])
}

fn fig5(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let eps = c.measurement.epsilon;
    let elc = detuning_table(c, "elc", Setting::Value(0.0), eps)?;
    let fb = detuning_table(c, "fb", c.feedback.gain, eps)?;
    let mut t = Table::new(
        "fig5",
        vec![
            col("delta_l_over_gamma", "Gamma", "dressing laser detuning"),
            col("nbar_elc", "1", "occupation without feedback (G = 0)"),
            col("energy_elc", "hbar nu", "energy without feedback"),
            col("status_elc", "", "ok | no_steady_state"),
            col("G_opt", "1", "feedback gain (optimised unless fixed in the config)"),
            col("phi_opt", "rad", "local oscillator phase (optimised unless fixed)"),
            col("nbar_fb", "1", "occupation with feedback"),
            col("energy_fb", "hbar nu", "energy with feedback"),
            col("status_fb", "", "ok | no_steady_state"),
        ],
    );
    let pick = |tab: &Table, name: &str| tab.rows.iter().map(|r| r[tab.column(name).unwrap()].clone()).collect::<Vec<_>>();
    let x = pick(&elc, "delta_l_over_gamma");
    let (n0, e0, s0) = (pick(&elc, "nbar"), pick(&elc, "energy"), pick(&elc, "status"));
    let (g1, p1, n1, e1, s1) = (
        pick(&fb, "G"),
        pick(&fb, "phi"),
        pick(&fb, "nbar"),
        pick(&fb, "energy"),
        pick(&fb, "status"),
    );
    for k in 0..x.len() {
        t.push(vec![
            x[k].clone(),
            n0[k].clone(),
            e0[k].clone(),
            s0[k].clone(),
            g1[k].clone(),
            p1[k].clone(),
            n1[k].clone(),
            e1[k].clone(),
            s1[k].clone(),
        ]);
    }
    let omega = c.atom.omega_l.hypot(c.atom.g);
    let nu = c.trap.nu;
    t.note(
        "cooling_resonance_over_gamma",
        num((omega * omega / (4.0 * nu) - nu) / c.atom.gamma),
    );
    t.plot = Some(Plot {
        x: "delta_l_over_gamma".into(),
        ys: vec!["nbar_elc".into(), "nbar_fb".into()],
        y_label: "nbar".into(),
        log_y: true,
        group: None,
    });
    Ok(vec![t])
}

fn fig6(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let mut t = detuning_table(c, "fig6", c.feedback.gain, c.measurement.epsilon)?;
    t.plot = Some(Plot {
        x: "delta_l_over_gamma".into(),
        ys: vec!["A_minus".into(), "A_plus".into(), "A_minus_fb".into(), "A_plus_fb".into()],
        y_label: "rate / Gamma0".into(),
        log_y: false,
        group: None,
    });
    Ok(vec![t])
}

// --- steady states and gain sweeps -----------------------------------------

struct SteadyRow {
    method: &'static str,
    gain: f64,
    phi: f64,
    report: Option<SteadyStateReport>,
    cutoff: Option<usize>,
    status: &'static str,
}

fn steady_rows(c: &ScenarioConfig, gain: Setting) -> Res<(Vec<SteadyRow>, Vec<(String, String)>)> {
    let eps = c.measurement.epsilon;
    let mut notes = Vec::new();
    let rows = match c.run.form {
        Form::Resonant => {
            let g0 = positive_gamma0(c, c.atom.delta_l)?;
            let nu = c.trap.nu;
            let gain = match gain.value() {
                Some(g) => g,
                None => {
                    let best = gaussian_best_gain(g0, nu, eps);
                    let [lo, hi] = c.feedback.gain_range;
                    let (a, b) = ((0.5 * best).max(lo), (2.0 * best).min(hi));
                    optimize_gain_with(
                        |g| match resonant_numeric(c, g0, eps, g) {
                            Ok((Some(r), _, _)) => Ok(r.energy),
                            _ => Err(Error::NoSteadyState { damping: 0.0 }),
                        },
                        a,
                        b,
                        GAIN_TOL,
                    )
                    .x
                }
            };
            let mut rows = Vec::new();
            let (formula, fs) = soft(gaussian_report(gain, g0, nu, eps), "feedback-engine").unwrap_or((None, "no_steady_state"));
            rows.push(SteadyRow {
                method: "gaussian_formula",
                gain,
                phi: 0.0,
                report: formula,
                cutoff: None,
                status: if gain > 0.0 { fs } else { "no_steady_state" },
            });
            let (numeric, s, n) = if gain > 0.0 {
                resonant_numeric(c, g0, eps, gain)?
            } else {
                (None, "no_steady_state", 0)
            };
            rows.push(SteadyRow {
                method: "numerical_ME",
                gain,
                phi: 0.0,
                report: numeric,
                cutoff: (n > 0).then_some(n),
                status: s,
            });
            notes.push(("gamma0".into(), num(g0)));
            rows
        }
        Form::LdGeneral | Form::PreRwa => {
            let sb = sideband(c, c.atom.delta_l)?;
            let p = rate_point(c, &sb, gain, eps)?;
            let n_levels = match p.nbar() {
                Some(nb) => c.trap.cutoff_for(nb),
                None => 1,
            };
            let (formula, fs) = soft(rate_equation_steady(&p.rates, n_levels), "feedback-engine")?;
            let (numeric, s, n) = rate_numeric(c, &sb, &p, eps)?;
            notes.push(("gamma0".into(), num(sb.gamma0)));
            notes.push(("W".into(), num(p.rates.w)));
            vec![
                SteadyRow {
                    method: "rate_equation",
                    gain: p.gain,
                    phi: p.phi,
                    report: formula,
                    cutoff: None,
                    status: fs,
                },
                SteadyRow {
                    method: "numerical_ME",
                    gain: p.gain,
                    phi: p.phi,
                    report: numeric,
                    cutoff: (n > 0).then_some(n),
                    status: s,
                },
            ]
        }
        Form::BeyondLambDicke => {
            let atom = c.atom.params(c.trap.nu, c.atom.delta_l);
            let quad = c.atom.quadrature();
            let d = recoil_diffusion(&atom, &quad).map_err(feedback_engine)?;
            let gain = gain.value().unwrap_or(d + (4.0 * eps + d * d).sqrt());
            let fb = FeedbackParams::new(gain).map_err(feedback_engine)?;
            let (res, s) = soft(beyond_ld_steady(&atom, eps, &fb, &quad), "feedback-engine")?;
            notes.push(("D".into(), num(d)));
            if let Some(r) = &res {
                notes.push(("optimal_gain".into(), num(r.optimal_gain)));
                notes.push(("min_energy".into(), num(r.min_energy)));
                notes.push(("recoil_limit".into(), num(r.recoil_limit)));
            }
            vec![SteadyRow {
                method: "ode_moments",
                gain,
                phi: 0.0,
                report: res.map(|r| r.report),
                cutoff: None,
                status: s,
            }]
        }
    };
    Ok((rows, notes))
}

fn steady(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let (rows, notes) = steady_rows(c, c.feedback.gain)?;
    let mut t = Table::new(
        "steady",
        vec![
            col("method", "", "rate_equation | gaussian_formula | ode_moments | numerical_ME"),
            col("G", "1", "feedback gain"),
            col("phi", "rad", "local oscillator phase"),
            col("nbar", "1", "steady mean occupation"),
            col("energy", "hbar nu", "steady energy"),
            col("ground_population", "1", "occupation of the motional ground state"),
            col("fock_cutoff", "1", "Fock cutoff of numerical rows"),
            col("status", "", "ok | no_steady_state | cutoff"),
        ],
    );
    t.notes = notes;
    let width = rows
        .iter()
        .filter_map(|r| r.report.as_ref().map(|x| x.distribution.len()))
        .max()
        .unwrap_or(0);
    let mut dist_cols = vec![col("n", "1", "Fock level")];
    for r in &rows {
        t.push(vec![
            Cell::text(r.method),
            Cell::Num(r.gain),
            Cell::Num(r.phi),
            Cell::opt(r.report.as_ref().map(|x| x.nbar)),
            Cell::opt(r.report.as_ref().map(|x| x.energy)),
            Cell::opt(r.report.as_ref().and_then(|x| x.distribution.first().copied())),
            r.cutoff.map_or(Cell::Empty, |n| Cell::Int(n as u64)),
            Cell::text(r.status),
        ]);
        dist_cols.push(col(&format!("p_{}", r.method), "1", "steady occupation of level n"));
    }
    let mut d = Table::new("steady_distribution", dist_cols);
    for k in 0..width {
        let mut row = vec![Cell::Int(k as u64)];
        for r in &rows {
            row.push(Cell::opt(r.report.as_ref().and_then(|x| x.distribution.get(k).copied())));
        }
        d.push(row);
    }
    d.plot = Some(Plot {
        x: "n".into(),
        ys: rows.iter().map(|r| format!("p_{}", r.method)).collect(),
        y_label: "p_n".into(),
        log_y: true,
        group: None,
    });
    Ok(vec![t, d])
}

fn sweep_gain(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let grid = c.run.sweep.values();
    if grid[0] < 0.0 {
        return Err(CliError::Physics {
            field: "run.sweep.start".into(),
            message: "gains must be >= 0".into(),
        });
    }
    let rows: Vec<Vec<SteadyRow>> = grid
        .par_iter()
        .map(|&g| steady_rows(c, Setting::Value(g)).map(|(r, _)| r))
        .collect::<Res<_>>()?;
    let mut t = Table::new(
        "sweep_gain",
        vec![
            col("G", "1", "feedback gain"),
            col("phi", "rad", "local oscillator phase"),
            col("nbar_formula", "1", "closed-form occupation for the configured form"),
            col("energy_formula", "hbar nu", "closed-form energy"),
            col("nbar_numerical", "1", "numerical master equation occupation"),
            col("energy_numerical", "hbar nu", "numerical master equation energy"),
            col("fock_cutoff", "1", "Fock cutoff of the numerical solve"),
            col("status", "", "ok | no_steady_state | cutoff"),
        ],
    );
    for (g, r) in grid.iter().zip(rows) {
        let f = &r[0];
        let numeric = r.get(1);
        let status = numeric.map_or(f.status, |n| worst(f.status, n.status));
        t.push(vec![
            Cell::Num(*g),
            Cell::Num(f.phi),
            Cell::opt(f.report.as_ref().map(|x| x.nbar)),
            Cell::opt(f.report.as_ref().map(|x| x.energy)),
            Cell::opt(numeric.and_then(|n| n.report.as_ref().map(|x| x.nbar))),
            Cell::opt(numeric.and_then(|n| n.report.as_ref().map(|x| x.energy))),
            numeric.and_then(|n| n.cutoff).map_or(Cell::Empty, |n| Cell::Int(n as u64)),
            Cell::text(status),
        ]);
    }
    t.plot = Some(Plot {
        x: "G".into(),
        ys: vec!["energy_formula".into(), "energy_numerical".into()],
        y_label: "E / hbar nu".into(),
        log_y: false,
        group: None,
    });
    Ok(vec![t])
}

fn fig3(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let nu = c.trap.nu;
    let g0 = positive_gamma0(c, 0.0)?;
    let ratios = c.run.sweep.values();
    let mut curve = Table::new(
        "fig3",
        vec![
            col("epsilon", "1", "collection efficiency"),
            col("G", "1", "feedback gain"),
            col("G_over_sqrt4eps", "1", "gain relative to sqrt(4 epsilon)"),
            col("energy_gaussian", "hbar nu", "Gaussian closed-form energy"),
            col("energy_numerical", "hbar nu", "numerical master equation energy"),
            col("fock_cutoff", "1", "Fock cutoff of the numerical solve"),
            col("status", "", "ok | cutoff"),
        ],
    );
    let mut minima = Table::new(
        "fig3_minima",
        vec![
            col("epsilon", "1", "collection efficiency"),
            col("G_opt", "1", "gain minimising the numerical energy"),
            col("E_min", "hbar nu", "minimal numerical energy"),
            col("G_opt_gaussian", "1", "gain minimising the Gaussian energy"),
            col("E_min_gaussian", "hbar nu", "minimal Gaussian energy"),
            col("G_limit", "1", "sqrt(4 epsilon)"),
            col("E_limit", "hbar nu", "1/(2 sqrt(epsilon)), the Gamma0 -> 0 minimum"),
            col("fock_cutoff", "1", "Fock cutoff at the minimum"),
        ],
    );
    for &eps in &c.run.epsilons {
        let scale = (4.0 * eps).sqrt();
        let pts: Vec<_> = ratios
            .par_iter()
            .map(|&r| resonant_numeric(c, g0, eps, r * scale))
            .collect::<Res<_>>()?;
        for (&r, (rep, s, n)) in ratios.iter().zip(pts) {
            let g = r * scale;
            curve.push(vec![
                Cell::Num(eps),
                Cell::Num(g),
                Cell::Num(r),
                Cell::Num(gaussian_steady_energy(g, g0, nu, eps).map_err(feedback_engine)?),
                Cell::opt(rep.map(|x| x.energy)),
                Cell::Int(n as u64),
                Cell::text(s),
            ]);
        }
        let gg = gaussian_best_gain(g0, nu, eps);
        let best = optimize_gain_with(
            |g| match resonant_numeric(c, g0, eps, g) {
                Ok((Some(r), _, _)) => Ok(r.energy),
                _ => Err(Error::NoSteadyState { damping: 0.0 }),
            },
            0.5 * gg,
            2.0 * gg,
            GAIN_TOL,
        );
        let (_, _, n_best) = resonant_numeric(c, g0, eps, best.x)?;
        minima.push(vec![
            Cell::Num(eps),
            Cell::Num(best.x),
            Cell::opt(best.value.is_finite().then_some(best.value)),
            Cell::Num(gg),
            Cell::Num(gaussian_steady_energy(gg, g0, nu, eps).map_err(feedback_engine)?),
            Cell::Num(scale),
            Cell::Num(0.5 / eps.sqrt()),
            Cell::Int(n_best as u64),
        ]);
    }
    curve.note("gamma0_over_nu", num(g0 / nu));
    curve.plot = Some(Plot {
        x: "G".into(),
        ys: vec!["energy_numerical".into(), "energy_gaussian".into()],
        y_label: "E / hbar nu".into(),
        log_y: false,
        group: Some("epsilon".into()),
    });
    Ok(vec![curve, minima])
}

// --- trajectories ----------------------------------------------------------

fn trajectory(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let eps = c.measurement.epsilon;
    let nu = c.trap.nu;
    let n = c.trap.cutoff_for(initial_occupation(&c.run.initial).max(1.0));
    let m = model(c, n)?;
    let mu0 = initial_state(&c.run.initial, n);
    let reduced = CliError::module("reduced-model");
    let spec = c.run.ensemble.spec();

    let (traj, me, gain, phi): (ReducedTrajectory, Option<Superop>, f64, f64) = match c.run.form {
        Form::Resonant => {
            let g0 = positive_gamma0(c, c.atom.delta_l)?;
            let gain = fixed_gain(c).unwrap_or_else(|| gaussian_best_gain(g0, nu, eps));
            let fb = FeedbackParams::new(gain).map_err(feedback_engine)?;
            let u = m.resonant(g0, eps).map_err(&reduced)?;
            let op = resonant_generator(&m, g0, eps, &fb).map_err(feedback_engine)?;
            (ReducedTrajectory::new(&m, u, &mu0).with_feedback(&m, fb, eps), Some(op), gain, 0.0)
        }
        Form::LdGeneral | Form::PreRwa => {
            let sb = sideband(c, c.atom.delta_l)?;
            let p = rate_point(c, &sb, c.feedback.gain, eps)?;
            let fb = FeedbackParams::new(p.gain).map_err(feedback_engine)?;
            let u = m.detuned(&sb, &c.measurement.params(p.phi)).map_err(&reduced)?;
            let op = pre_rwa_generator(&m, &sb, eps, p.phi, &fb).map_err(feedback_engine)?;
            (ReducedTrajectory::new(&m, u, &mu0).with_feedback(&m, fb, eps), Some(op), p.gain, p.phi)
        }
        Form::BeyondLambDicke => {
            let atom = c.atom.params(nu, c.atom.delta_l);
            let gain = fixed_gain(c).unwrap_or(0.0);
            let phi = c.measurement.phi.value().unwrap_or(0.0);
            let u = m
                .general(&atom, &c.measurement.params(phi), &c.atom.quadrature(), true)
                .map_err(&reduced)?;
            let fb = FeedbackParams::new(gain).map_err(feedback_engine)?;
            (ReducedTrajectory::new(&m, u, &mu0).with_feedback(&m, fb, eps), None, gain, phi)
        }
    };
    let stats = run_ensemble(&traj, &spec, c.run.seed).map_err(CliError::module("sde-integrator"))?;
    let me_n: Vec<Option<f64>> = match &me {
        Some(op) => evolve_checkpoints(op, &mu0, &stats.times, spec.dt)
            .iter()
            .map(|mu| Some(eitlab_core::hilbert::expect(m.ops().n.matrix(), mu).re))
            .collect(),
        None => vec![None; stats.times.len()],
    };

    let mut cols = vec![col("t_nu", "1/nu", "time times the trap frequency")];
    for o in REDUCED_OBSERVABLES {
        cols.push(col(&format!("mean_{o}"), "1", &format!("ensemble mean of {o}")));
        cols.push(col(&format!("se_{o}"), "1", &format!("standard error of mean_{o}")));
    }
    cols.push(col("me_n", "1", "mean occupation from the feedback master equation"));
    let mut t = Table::new("trajectory", cols);
    for (k, time) in stats.times.iter().enumerate() {
        let mut row = vec![Cell::Num(time * nu)];
        for j in 0..REDUCED_OBSERVABLES.len() {
            row.push(Cell::Num(stats.mean[k][j]));
            row.push(Cell::Num(stats.std_err[k][j]));
        }
        row.push(Cell::opt(me_n[k]));
        t.push(row);
    }
    t.note("trajectories", stats.trajectories);
    t.note("dt", num(spec.dt));
    t.note("G", num(gain));
    t.note("phi", num(phi));
    t.note("fock_cutoff", n);
    t.note("max_trace_correction", num(stats.max_trace_correction));
    t.plot = Some(Plot {
        x: "t_nu".into(),
        ys: vec!["mean_n".into(), "me_n".into()],
        y_label: "<n>".into(),
        log_y: false,
        group: None,
    });
    Ok(vec![t])
}

// --- adiabatic elimination -------------------------------------------------

fn elimination_run(c: &ScenarioConfig, omega_l: f64, g: f64, times: &[f64]) -> Res<Vec<EliminationSample>> {
    let mut section = c.atom.clone();
    section.omega_l = omega_l;
    section.g = g;
    let atom = section.params(c.trap.nu, c.atom.delta_l);
    let n = c.trap.cutoff_for(initial_occupation(&c.run.initial).max(1.0));
    let trap = c.trap.params(n)?;
    let mu0 = initial_state(&c.run.initial, n);
    compare_elimination(&atom, &trap, &c.atom.quadrature(), &mu0, times).map_err(CliError::module("full-model"))
}

fn validate_elimination(c: &ScenarioConfig) -> Res<Vec<Table>> {
    let nu = c.trap.nu;
    let e = &c.run.elimination;
    let horizon = e.periods * TAU / nu;
    let times: Vec<f64> = (0..=e.checkpoints)
        .map(|k| horizon * k as f64 / e.checkpoints as f64)
        .collect();
    let ratio = c.atom.g / c.atom.omega_l;
    let low = e.compare_omega_l * nu;
    let (main, cmp) = rayon::join(
        || elimination_run(c, c.atom.omega_l, c.atom.g, &times),
        || elimination_run(c, low, ratio * low, &times),
    );
    let (main, cmp) = (main?, cmp?);
    let mut t = Table::new(
        "validate_elimination",
        vec![
            col("t_nu", "1/nu", "time times the trap frequency"),
            col("p2_full", "1", "<p^2> of the three-level model"),
            col("p2_reduced", "1", "<p^2> of the reduced model"),
            col("rel_dev", "1", "|full - reduced| / full"),
            col("p2_full_compare", "1", "<p^2> of the three-level model at the comparison Omega_L"),
            col("p2_reduced_compare", "1", "<p^2> of the reduced model at the comparison Omega_L"),
            col("rel_dev_compare", "1", "relative deviation at the comparison Omega_L"),
        ],
    );
    let max_dev = |s: &[EliminationSample]| s.iter().map(|x| x.relative_deviation()).fold(0.0, f64::max);
    for (a, b) in main.iter().zip(&cmp) {
        t.push(vec![
            Cell::Num(a.t * nu),
            Cell::Num(a.full),
            Cell::Num(a.reduced),
            Cell::Num(a.relative_deviation()),
            Cell::Num(b.full),
            Cell::Num(b.reduced),
            Cell::Num(b.relative_deviation()),
        ]);
    }
    let (d_main, d_cmp) = (max_dev(&main), max_dev(&cmp));
    t.note("max_rel_dev", num(d_main));
    t.note("compare_omega_l_over_nu", num(e.compare_omega_l));
    t.note("max_rel_dev_compare", num(d_cmp));
    t.note("deviation_grows", d_cmp > d_main);
    t.plot = Some(Plot {
        x: "t_nu".into(),
        ys: vec!["p2_full".into(), "p2_reduced".into()],
        y_label: "<p^2>".into(),
        log_y: false,
        group: None,
    });
    Ok(vec![t])
}
