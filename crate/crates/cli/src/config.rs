// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration: JSON ingestion, presets and default resolution.
//!
//! Every frequency is given in the base unit (`Γ` or `ν`), whose own value
//! must then be 1. Detuning grids are always in units of `Γ`.

use std::fmt;
use std::path::Path;

use eitlab_core::feedback::Solver;
use eitlab_core::hilbert::DEFAULT_QUADRATURE_ORDER;
use eitlab_core::{AngularQuadrature, AtomParams, EnsembleSpec, FockSpace, MeasurementParams, TrapParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BaseUnit {
    #[default]
    Gamma,
    #[serde(rename = "nu")]
    Nu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rates,
    Steady,
    SweepGain,
    SweepDetuning,
    Trajectory,
    ValidateElimination,
    Fig3,
    Fig5,
    Fig6,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rates => "rates",
            Mode::Steady => "steady",
            Mode::SweepGain => "sweep_gain",
            Mode::SweepDetuning => "sweep_detuning",
            Mode::Trajectory => "trajectory",
            Mode::ValidateElimination => "validate_elimination",
            Mode::Fig3 => "fig3",
            Mode::Fig5 => "fig5",
            Mode::Fig6 => "fig6",
        }
    }

    /// Values the mode starts from before the user's file is applied.
    fn preset(self) -> Value {
        match self {
            Mode::Fig3 => json!({
                "base_unit": "nu",
                "trap": {"fock_cutoff": "auto"},
                "measurement": {"gamma0": 0.01, "phi": 0.0},
                "run": {
                    "form": "resonant",
                    "epsilons": [0.1, 0.05, 0.01],
                    "sweep": {"start": 0.5, "stop": 2.0, "points": 13, "spacing": "log"}
                }
            }),
            Mode::Fig5 => json!({
                "base_unit": "Gamma",
                "atom": {"omega_l": 0.8},
                "trap": {"nu": 0.1},
                "measurement": {"epsilon": 0.05, "phi": "optimize"},
                "feedback": {"G": "optimize"},
                "run": {"sweep": {"start": -1.5, "stop": 2.0, "points": 36}}
            }),
            Mode::Fig6 => json!({
                "base_unit": "Gamma",
                "atom": {"omega_l": 0.8},
                "trap": {"nu": 0.1},
                "measurement": {"epsilon": 0.05, "phi": "optimize"},
                "feedback": {"G": 1.0},
                "run": {"sweep": {"start": -1.5, "stop": 2.0, "points": 71}}
            }),
            Mode::ValidateElimination => json!({
                "base_unit": "nu",
                "atom": {
                    "gamma": 2.0, "gamma_r": 0.0, "omega_l": 20.0, "g": 1.0,
                    "eta_g": 0.05, "eta_r": -0.05
                },
                "trap": {"fock_cutoff": 14},
                "run": {"initial": {"coherent": [1.0, 0.0]}}
            }),
            Mode::SweepGain => json!({"run": {"sweep": {"start": 0.1, "stop": 2.0, "points": 20}}}),
            Mode::SweepDetuning => json!({"run": {"sweep": {"start": -1.5, "stop": 2.0, "points": 36}}}),
            Mode::Rates | Mode::Steady | Mode::Trajectory => json!({}),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimize {
    #[serde(rename = "optimize")]
    Optimize,
}

/// A number, or `"optimize"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    Keyword(Optimize),
}

impl Setting {
    pub fn value(self) -> Option<f64> {
        match self {
            Setting::Value(v) => Some(v),
            Setting::Keyword(_) => None,
        }
    }
}

/// A Fock cutoff, or `"auto"` to size it from the expected occupation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cutoff {
    Fixed(usize),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `Δ_L = 0` with `p̂` measured and fed back.
    Resonant,
    /// Sideband rate equation and its master equation.
    LdGeneral,
    /// Detuned feedback master equation before the rotating-wave step.
    PreRwa,
    /// Moment equations with recoil heating.
    BeyondLambDicke,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Vacuum,
    Thermal(f64),
    Coherent([f64; 2]),
    Fock(usize),
}

// --- raw file layout -------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    base_unit: Option<BaseUnit>,
    #[serde(default)]
    atom: RawAtom,
    #[serde(default)]
    trap: RawTrap,
    #[serde(default)]
    measurement: RawMeasurement,
    #[serde(default)]
    feedback: RawFeedback,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    gamma: Option<f64>,
    gamma_g: Option<f64>,
    gamma_r: Option<f64>,
    omega_l: Option<f64>,
    g: Option<f64>,
    delta_p: Option<f64>,
    delta_l: Option<f64>,
    eta_g: Option<f64>,
    eta_r: Option<f64>,
    quadrature_order: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    nu: Option<f64>,
    fock_cutoff: Option<Cutoff>,
    edge_band: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasurement {
    epsilon: Option<f64>,
    phi: Option<Setting>,
    gamma0: Option<f64>,
    series_cutoff: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeedback {
    #[serde(rename = "G")]
    gain: Option<Setting>,
    #[serde(rename = "G_range")]
    gain_range: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: Option<Mode>,
    form: Option<Form>,
    solver: Option<Solver>,
    seed: Option<u64>,
    #[serde(default)]
    ensemble: RawEnsemble,
    sweep: Option<RawSweep>,
    epsilons: Option<Vec<f64>>,
    initial: Option<Initial>,
    #[serde(default)]
    elimination: RawElimination,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    #[serde(rename = "M")]
    m: Option<usize>,
    dt: Option<Dt>,
    #[serde(rename = "T")]
    t: Option<f64>,
    record_stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Dt {
    Value(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    start: f64,
    stop: f64,
    points: usize,
    #[serde(default)]
    spacing: Option<Spacing>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElimination {
    periods: Option<f64>,
    checkpoints: Option<usize>,
    compare_omega_l: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    formats: Option<Vec<Format>>,
}

// --- resolved configuration ------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomSection {
    pub gamma: f64,
    pub gamma_g: f64,
    pub gamma_r: f64,
    pub omega_l: f64,
    pub g: f64,
    /// `None` keeps the probe on the dark resonance of every grid point.
    pub delta_p: Option<f64>,
    pub delta_l: f64,
    pub eta_g: f64,
    pub eta_r: f64,
    pub quadrature_order: usize,
}

impl AtomSection {
    /// Core parameters at laser detuning `delta_l`.
    pub fn params(&self, nu: f64, delta_l: f64) -> AtomParams {
        let mut a = AtomParams {
            gamma: self.gamma,
            gamma_g: self.gamma_g,
            gamma_r: self.gamma_r,
            omega_l: self.omega_l,
            g: self.g,
            delta_p: 0.0,
            delta_l,
            eta_g: self.eta_g,
            eta_r: self.eta_r,
        };
        a.delta_p = self.delta_p.unwrap_or_else(|| a.dark_resonance_delta_p(nu));
        a
    }

    pub fn quadrature(&self) -> AngularQuadrature {
        AngularQuadrature::new(self.quadrature_order).expect("validated at load")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapSection {
    pub nu: f64,
    pub fock_cutoff: Cutoff,
    pub edge_band: Option<usize>,
}

/// Bounds for `"auto"` cutoffs.
pub const AUTO_CUTOFF_RANGE: (usize, usize) = (20, 200);

impl TrapSection {
    /// Cutoff for a state with mean occupation near `nbar`. Fixed cutoffs are
    /// returned unchanged; `"auto"` keeps a thermal tail beyond the edge band
    /// below `1e-8`.
    pub fn cutoff_for(&self, nbar: f64) -> usize {
        match self.fock_cutoff {
            Cutoff::Fixed(n) => n,
            Cutoff::Keyword(AutoKeyword::Auto) => {
                let (lo, hi) = AUTO_CUTOFF_RANGE;
                if !(nbar > 0.0) || !nbar.is_finite() {
                    return if nbar.is_finite() { lo } else { hi };
                }
                let r = nbar / (nbar + 1.0);
                // the edge band is a tenth of the cutoff
                let core = (1e-8f64).ln() / r.ln();
                ((core / 0.9).ceil() as usize + 2).clamp(lo, hi)
            }
        }
    }

    pub fn space(&self, cutoff: usize) -> Result<FockSpace, CliError> {
        let s = match self.edge_band {
            Some(b) => FockSpace::with_edge_band(cutoff, b),
            None => FockSpace::new(cutoff),
        };
        s.map_err(|e| CliError::from_core_in("trap", e))
    }

    pub fn params(&self, cutoff: usize) -> Result<TrapParams, CliError> {
        TrapParams::new(self.nu, self.space(cutoff)?).map_err(|e| CliError::from_core_in("trap", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSection {
    pub epsilon: f64,
    pub phi: Setting,
    /// Measurement rate override; `None` uses `λ²Γ` of the atom.
    pub gamma0: Option<f64>,
    pub series_cutoff: Option<usize>,
}

impl MeasurementSection {
    pub fn params(&self, phi: f64) -> MeasurementParams {
        MeasurementParams {
            epsilon: self.epsilon,
            phi,
            series_cutoff: self.series_cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackSection {
    #[serde(rename = "G")]
    pub gain: Setting,
    #[serde(rename = "G_range")]
    pub gain_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let f = k as f64 / last;
                match self.spacing {
                    Spacing::Linear => (self.start * (last - k as f64) + self.stop * k as f64) / last,
                    Spacing::Log => self.start * (self.stop / self.start).powf(f),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSection {
    #[serde(rename = "M")]
    pub m: usize,
    pub dt: f64,
    pub dt_auto: bool,
    #[serde(rename = "T")]
    pub t: f64,
    pub record_stride: usize,
}

impl EnsembleSection {
    pub fn spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            m: self.m,
            dt: self.dt,
            t: self.t,
            record_stride: self.record_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationSection {
    /// Horizon in trap periods.
    pub periods: f64,
    pub checkpoints: usize,
    /// Dressing Rabi frequency of the comparison run, in units of `ν`.
    pub compare_omega_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub mode: Mode,
    pub form: Form,
    pub solver: Solver,
    pub seed: u64,
    pub ensemble: EnsembleSection,
    pub sweep: Grid,
    pub epsilons: Vec<f64>,
    pub initial: Initial,
    pub elimination: EliminationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<Format>,
}

/// A configuration with every default resolved and every invariant checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub base_unit: BaseUnit,
    pub atom: AtomSection,
    pub trap: TrapSection,
    pub measurement: MeasurementSection,
    pub feedback: FeedbackSection,
    pub run: RunSection,
    pub output: OutputSection,
}

/// Command-line overrides applied after the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<String>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    /// Reads `path` (or an empty object) and resolves it for `mode`.
    pub fn load(path: Option<&Path>, mode: Mode, overrides: &Overrides) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Io {
                path: p.display().to_string(),
                source: e,
            })?,
            None => "{}".to_string(),
        };
        Self::from_json_str(&text, mode, overrides)
    }

    pub fn from_json_str(text: &str, mode: Mode, overrides: &Overrides) -> Result<Self, CliError> {
        let user: Value = serde_json::from_str(text).map_err(|e| CliError::Syntax {
            path: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if !user.is_object() {
            return Err(CliError::Syntax {
                path: "$".into(),
                message: "configuration must be a JSON object".into(),
            });
        }
        let mut merged = mode.preset();
        merge(&mut merged, user);
        let raw: RawConfig = serde_path_to_error::deserialize(merged).map_err(|e| CliError::Syntax {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        resolve(raw, mode, overrides)
    }

    /// Measurement rate at laser detuning `delta_l`.
    pub fn gamma0(&self, delta_l: f64) -> Result<f64, CliError> {
        if let Some(g0) = self.measurement.gamma0 {
            return Ok(g0);
        }
        let atom = self.atom.params(self.trap.nu, delta_l);
        eitlab_core::lambda::dressed_states(&atom, self.trap.nu)
            .map(|d| d.gamma0)
            .map_err(|e| CliError::from_core_in("atom", e))
    }
}

/// Overlays `top` onto `base`, object by object.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, top) => *slot = top,
    }
}

fn physics(field: &str, message: impl Into<String>) -> CliError {
    CliError::Physics {
        field: field.to_string(),
        message: message.into(),
    }
}

fn finite(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(physics(field, "must be finite"))
    }
}

fn resolve(raw: RawConfig, mode: Mode, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    if let Some(m) = raw.run.mode {
        if m != mode {
            return Err(CliError::Syntax {
                path: "run.mode".into(),
                message: format!("config asks for `{m}` but the subcommand is `{mode}`"),
            });
        }
    }
    let base_unit = raw.base_unit.unwrap_or_default();
    // the same physical point in either unit
    let (gamma_d, nu_d, omega_d, g_d) = match base_unit {
        BaseUnit::Gamma => (1.0, 0.1, 0.8, 0.04),
        BaseUnit::Nu => (10.0, 1.0, 8.0, 0.4),
    };

    let a = raw.atom;
    let gamma = finite("atom.gamma", a.gamma.unwrap_or(gamma_d))?;
    let gamma_r = finite("atom.gamma_r", a.gamma_r.unwrap_or(0.0))?;
    let gamma_g = finite("atom.gamma_g", a.gamma_g.unwrap_or(gamma - gamma_r))?;
    let atom = AtomSection {
        gamma,
        gamma_g,
        gamma_r,
        omega_l: finite("atom.omega_l", a.omega_l.unwrap_or(omega_d))?,
        g: finite("atom.g", a.g.unwrap_or(g_d))?,
        delta_p: a.delta_p.map(|v| finite("atom.delta_p", v)).transpose()?,
        delta_l: finite("atom.delta_l", a.delta_l.unwrap_or(0.0))?,
        eta_g: finite("atom.eta_g", a.eta_g.unwrap_or(0.05))?,
        eta_r: finite("atom.eta_r", a.eta_r.unwrap_or(-0.05))?,
        quadrature_order: a.quadrature_order.unwrap_or(DEFAULT_QUADRATURE_ORDER),
    };
    if atom.quadrature_order < 4 {
        return Err(physics("atom.quadrature_order", "angular averages need order >= 4"));
    }

    let trap = TrapSection {
        nu: finite("trap.nu", raw.trap.nu.unwrap_or(nu_d))?,
        fock_cutoff: raw.trap.fock_cutoff.unwrap_or(Cutoff::Fixed(40)),
        edge_band: raw.trap.edge_band,
    };
    if !(trap.nu > 0.0) {
        return Err(physics("trap.nu", "trap frequency must be positive"));
    }
    match base_unit {
        BaseUnit::Gamma if atom.gamma != 1.0 => {
            return Err(physics("atom.gamma", "must be 1 when base_unit is \"Gamma\""))
        }
        BaseUnit::Nu if trap.nu != 1.0 => {
            return Err(physics("trap.nu", "must be 1 when base_unit is \"nu\""))
        }
        _ => {}
    }
    atom.params(trap.nu, atom.delta_l)
        .validate()
        .map_err(|e| CliError::from_core_in("atom", e))?;
    if let Cutoff::Fixed(n) = trap.fock_cutoff {
        trap.space(n)?;
    }

    let meas = raw.measurement;
    let measurement = MeasurementSection {
        epsilon: meas.epsilon.unwrap_or(0.05),
        phi: meas.phi.unwrap_or(Setting::Value(0.0)),
        gamma0: meas.gamma0,
        series_cutoff: meas.series_cutoff,
    };
    if !(measurement.epsilon > 0.0 && measurement.epsilon <= 1.0) {
        return Err(physics(
            "measurement.epsilon",
            format!("collection efficiency must lie in (0, 1], got {}", measurement.epsilon),
        ));
    }
    if let Some(phi) = measurement.phi.value() {
        finite("measurement.phi", phi)?;
    }
    if let Some(g0) = measurement.gamma0 {
        if !(g0 > 0.0) || !g0.is_finite() {
            return Err(physics("measurement.gamma0", "must be positive and finite"));
        }
    }
    if measurement.series_cutoff == Some(0) {
        return Err(physics("measurement.series_cutoff", "must be at least 1"));
    }

    let feedback = FeedbackSection {
        gain: raw.feedback.gain.unwrap_or(Setting::Value(0.0)),
        gain_range: raw.feedback.gain_range.unwrap_or([0.0, 4.0]),
    };
    if let Some(g) = feedback.gain.value() {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(physics("feedback.G", format!("gain must be finite and >= 0, got {g}")));
        }
    }
    let [lo, hi] = feedback.gain_range;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(physics("feedback.G_range", "need 0 <= lo < hi"));
    }

    let run = resolve_run(raw.run, mode, overrides, &trap, &measurement, &feedback, &atom)?;
    if run.form == Form::Resonant && measurement.phi != Setting::Value(0.0) && matches!(mode, Mode::Steady | Mode::SweepGain | Mode::Trajectory | Mode::Fig3) {
        return Err(physics("measurement.phi", "the resonant form measures p (phi = 0)"));
    }
    if run.form == Form::BeyondLambDicke && atom.gamma_r >= atom.gamma_g {
        return Err(physics("atom.gamma_r", "the recoil series needs gamma_r < gamma_g"));
    }

    let output = OutputSection {
        directory: overrides
            .out
            .clone()
            .or(raw.output.directory)
            .unwrap_or_else(|| "out".to_string()),
        formats: raw.output.formats.unwrap_or_else(|| vec![Format::Csv]),
    };
    if !output.formats.contains(&Format::Csv) {
        return Err(physics("output.formats", "csv output is always written and must be listed"));
    }

    Ok(ScenarioConfig {
        base_unit,
        atom,
        trap,
        measurement,
        feedback,
        run,
        output,
    })
}

fn resolve_run(
    raw: RawRun,
    mode: Mode,
    overrides: &Overrides,
    trap: &TrapSection,
    meas: &MeasurementSection,
    fb: &FeedbackSection,
    atom: &AtomSection,
) -> Result<RunSection, CliError> {
    let form = raw.form.unwrap_or(Form::LdGeneral);
    let gamma0_hint = meas.gamma0.unwrap_or(0.0);
    let gain_hint = fb.gain.value().unwrap_or(fb.gain_range[1]);
    let (dt, dt_auto) = match raw.ensemble.dt {
        Some(Dt::Value(v)) => (v, false),
        _ => (
            eitlab_core::sde::default_dt(trap.nu, gamma0_hint, gain_hint, meas.epsilon, None),
            true,
        ),
    };
    let t = raw.ensemble.t.unwrap_or(10.0 / trap.nu);
    let steps = if dt > 0.0 { (t / dt).round().max(1.0) as usize } else { 1 };
    let ensemble = EnsembleSection {
        m: raw.ensemble.m.unwrap_or(200),
        dt,
        dt_auto,
        t,
        record_stride: raw.ensemble.record_stride.unwrap_or((steps / 10).max(1)),
    };
    ensemble
        .spec()
        .validate()
        .map_err(|e| CliError::from_core_in("run.ensemble", e))?;

    let sweep = match raw.sweep {
        Some(s) => Grid {
            start: s.start,
            stop: s.stop,
            points: s.points,
            spacing: s.spacing.unwrap_or(Spacing::Linear),
        },
        None => Grid {
            start: atom.delta_l,
            stop: atom.delta_l + 1.0,
            points: 2,
            spacing: Spacing::Linear,
        },
    };
    if sweep.points < 2 || !(sweep.stop > sweep.start) || !sweep.start.is_finite() || !sweep.stop.is_finite() {
        return Err(physics("run.sweep", "need points >= 2 and start < stop (monotone grid)"));
    }
    if sweep.spacing == Spacing::Log && !(sweep.start > 0.0) {
        return Err(physics("run.sweep.start", "log spacing needs start > 0"));
    }

    let epsilons = raw.epsilons.unwrap_or_else(|| vec![meas.epsilon]);
    for (k, &e) in epsilons.iter().enumerate() {
        if !(e > 0.0 && e <= 1.0) {
            return Err(physics(&format!("run.epsilons[{k}]"), "collection efficiency must lie in (0, 1]"));
        }
    }
    let initial = raw.initial.unwrap_or(Initial::Vacuum);
    match &initial {
        Initial::Thermal(n) if !(*n >= 0.0) || !n.is_finite() => {
            return Err(physics("run.initial.thermal", "mean occupation must be >= 0"))
        }
        Initial::Coherent([re, im]) if !re.is_finite() || !im.is_finite() => {
            return Err(physics("run.initial.coherent", "amplitude must be finite"))
        }
        Initial::Fock(k) => {
            if let Cutoff::Fixed(n) = trap.fock_cutoff {
                if *k >= n {
                    return Err(physics("run.initial.fock", "level must lie below the cutoff"));
                }
            }
        }
        _ => {}
    }
    let elimination = EliminationSection {
        periods: raw.elimination.periods.unwrap_or(3.0),
        checkpoints: raw.elimination.checkpoints.unwrap_or(60),
        compare_omega_l: raw.elimination.compare_omega_l.unwrap_or(3.0),
    };
    if !(elimination.periods > 0.0) || !elimination.periods.is_finite() {
        return Err(physics("run.elimination.periods", "must be positive"));
    }
    if elimination.checkpoints < 1 {
        return Err(physics("run.elimination.checkpoints", "must be at least 1"));
    }
    if !(elimination.compare_omega_l > 0.0) || !elimination.compare_omega_l.is_finite() {
        return Err(physics("run.elimination.compare_omega_l", "must be positive"));
    }

    Ok(RunSection {
        mode,
        form,
        solver: raw.solver.unwrap_or(Solver::Direct),
        seed: overrides.seed.or(raw.seed).unwrap_or(0),
        ensemble,
        sweep,
        epsilons,
        initial,
        elimination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, mode: Mode) -> Result<ScenarioConfig, CliError> {
        ScenarioConfig::from_json_str(text, mode, &Overrides::default())
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = load("{}", Mode::Rates).unwrap();
        assert_eq!(c.atom.quadrature_order, 32);
        assert!(c.run.ensemble.dt_auto);
        assert!(c.run.ensemble.dt > 0.0);
        assert_eq!(c.atom.gamma_g, 1.0);
        assert_eq!(c.output.formats, vec![Format::Csv]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        match load(r#"{"atom": {"gammma": 1.0}}"#, Mode::Rates) {
            Err(CliError::Syntax { path, .. }) => assert_eq!(path, "atom.gammma"),
            other => panic!("{other:?}"),
        }
        match load(r#"{"run": {"ensemble": {"m": 3}}}"#, Mode::Rates) {
            Err(CliError::Syntax { path, .. }) => assert_eq!(path, "run.ensemble.m"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_names_field() {
        match load(r#"{"measurement": {"epsilon": "high"}}"#, Mode::Rates) {
            Err(e @ CliError::Syntax { .. }) => {
                assert_eq!(e.exit_code(), 2);
                assert!(e.to_string().contains("measurement.epsilon"), "{e}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn epsilon_out_of_range_is_physics() {
        let e = load(r#"{"measurement": {"epsilon": 1.5}}"#, Mode::Rates).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("measurement.epsilon"));
    }

    #[test]
    fn branching_mismatch_is_physics() {
        let e = load(r#"{"atom": {"gamma_g": 0.7, "gamma_r": 0.2}}"#, Mode::Rates).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("atom.gamma_g"), "{e}");
    }

    #[test]
    fn fig5_preset_expands() {
        let c = load("{}", Mode::Fig5).unwrap();
        assert_eq!(c.base_unit, BaseUnit::Gamma);
        assert_eq!(c.measurement.epsilon, 0.05);
        assert_eq!(c.atom.omega_l, 0.8);
        assert_eq!(c.trap.nu, 0.1);
        let grid = c.run.sweep.values();
        assert_eq!(grid.first(), Some(&-1.5));
        assert_eq!(grid.last(), Some(&2.0));
        assert!(grid.contains(&0.0));
        assert_eq!(c.feedback.gain, Setting::Keyword(Optimize::Optimize));
    }

    #[test]
    fn user_values_override_preset() {
        let c = load(r#"{"measurement": {"epsilon": 0.2}}"#, Mode::Fig5).unwrap();
        assert_eq!(c.measurement.epsilon, 0.2);
        assert_eq!(c.measurement.phi, Setting::Keyword(Optimize::Optimize));
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let e = load(r#"{"run": {"mode": "fig3"}}"#, Mode::Rates).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn base_unit_must_be_one() {
        let e = load(r#"{"base_unit": "nu", "trap": {"nu": 2.0}}"#, Mode::Rates).unwrap_err();
        assert!(e.to_string().contains("trap.nu"));
    }

    #[test]
    fn auto_cutoff_grows_with_occupation() {
        let t = TrapSection {
            nu: 1.0,
            fock_cutoff: Cutoff::Keyword(AutoKeyword::Auto),
            edge_band: None,
        };
        assert!(t.cutoff_for(0.1) < t.cutoff_for(4.5));
        assert!(t.cutoff_for(4.5) >= 80);
        assert_eq!(t.cutoff_for(1e6), AUTO_CUTOFF_RANGE.1);
    }

    #[test]
    fn grid_is_monotone() {
        let g = Grid {
            start: 0.5,
            stop: 2.0,
            points: 13,
            spacing: Spacing::Log,
        };
        let v = g.values();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!((v[6] - 1.0).abs() < 1e-12);
    }
}
