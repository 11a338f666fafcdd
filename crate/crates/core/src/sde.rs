// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Wiener increments, trajectory ensembles and weak-convergence checks.
//!
//! Noise for trajectory `k` of a run with seed `s` comes from ChaCha20 keyed
//! by `s`, on stream `k`. Increment `j` uses the four 32-bit words starting at
//! word `4j`: two 53-bit uniforms `u₁, u₂` feed the cosine branch of
//! Box–Muller, `√(−2 ln u₁) cos(2πu₂)`. Any increment can be regenerated from
//! `(seed, trajectory, position)` alone.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{kick_angle, FeedbackKick, FeedbackParams};
use crate::full_model::{FullModel, FullState};
use crate::hilbert::FockSpace;
use crate::reduced::{ReducedModel, StepScratch, Unraveling};
use crate::superop::{flatten, SparseOp};
use crate::{CMat, C64};

/// Counter-addressed Gaussian noise for one trajectory.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    trajectory: u64,
    position: u64,
    rng: ChaCha20Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        Self::at(seed, trajectory, 0)
    }

    /// Stream positioned so that the next sample is increment `position`.
    pub fn at(seed: u64, trajectory: u64, position: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(trajectory);
        rng.set_word_pos(4 * position as u128);
        NoiseStream {
            seed,
            trajectory,
            position,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectory(&self) -> u64 {
        self.trajectory
    }

    /// Index of the next increment.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Standard normal sample.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = open_unit(self.rng.next_u64());
        let u2 = open_unit(self.rng.next_u64());
        self.position += 1;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Uniform in `(0, 1)` from the top 53 bits.
fn open_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `dW ~ N(0, dt)`.
pub fn wiener_increment(stream: &mut NoiseStream, dt: f64) -> f64 {
    dt.sqrt() * stream.gaussian()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Number of trajectories.
    pub m: usize,
    pub dt: f64,
    /// Horizon.
    pub t: f64,
    /// Steps between recorded samples.
    pub record_stride: usize,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid("run.ensemble.M", "need at least one trajectory"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("run.ensemble.dt", "must be positive"));
        }
        if !(self.t >= self.dt) {
            return Err(Error::invalid("run.ensemble.T", "horizon must be at least one step"));
        }
        if self.record_stride < 1 {
            return Err(Error::invalid("run.ensemble.record_stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t / self.dt).round().max(1.0) as usize
    }

    /// Recording times, starting at `t = 0`.
    pub fn record_times(&self) -> Vec<f64> {
        (0..=self.steps())
            .step_by(self.record_stride)
            .map(|k| k as f64 * self.dt)
            .collect()
    }
}

/// `0.005 · min(1/ν, 1/Γ₀, 1/(Γ₀G²/8ε), 1/Γ)`, skipping zero rates.
pub fn default_dt(nu: f64, gamma0: f64, gain: f64, epsilon: f64, gamma: Option<f64>) -> f64 {
    let fb = gamma0 * gain * gain / (8.0 * epsilon) + 1e-30;
    let mut rates = vec![nu, gamma0, fb];
    rates.extend(gamma);
    let fastest = rates.into_iter().filter(|r| *r > 0.0).fold(0.0, f64::max);
    0.005 / fastest
}

/// A conditioned model that ensembles can drive.
pub trait Trajectory: Sync {
    type State: Send;

    /// Names of the recorded observables.
    fn observables(&self) -> Vec<String>;
    fn initial(&self) -> Self::State;
    /// Advances one step and returns the time-bin averaged current and the
    /// trace correction applied.
    fn step(&self, state: &mut Self::State, dw: f64, dt: f64) -> Result<(f64, f64)>;
    /// Appends the observables (in the order of [`Trajectory::observables`]);
    /// `current` is the most recent current sample.
    fn observe(&self, state: &Self::State, current: f64, out: &mut Vec<f64>);
}

/// One trajectory's record, row per recording time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<Vec<f64>>,
    /// Mean `|Tr − 1|` before renormalisation over all steps.
    pub mean_trace_correction: f64,
}

pub fn run_trajectory<T: Trajectory>(
    model: &T,
    spec: &EnsembleSpec,
    seed: u64,
    index: u64,
) -> Result<TrajectoryRecord> {
    let mut noise = NoiseStream::new(seed, index);
    let mut state = model.initial();
    let mut samples = Vec::with_capacity(spec.steps() / spec.record_stride + 1);
    let mut row = Vec::new();
    model.observe(&state, 0.0, &mut row);
    samples.push(row);
    let mut correction = 0.0;
    let steps = spec.steps();
    for k in 1..=steps {
        let position = noise.position();
        let dw = wiener_increment(&mut noise, spec.dt);
        let (current, tc) = model
            .step(&mut state, dw, spec.dt)
            .map_err(|e| Error::Trajectory {
                index,
                position,
                source: Box::new(e),
            })?;
        correction += tc.abs();
        if k % spec.record_stride == 0 {
            let mut row = Vec::new();
            model.observe(&state, current, &mut row);
            samples.push(row);
        }
    }
    Ok(TrajectoryRecord {
        samples,
        mean_trace_correction: correction / steps as f64,
    })
}

/// Ensemble means and standard errors per recording time and observable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub observables: Vec<String>,
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    /// Standard error of the mean; zero when `M = 1`.
    pub std_err: Vec<Vec<f64>>,
    pub trajectories: usize,
    /// Largest per-trajectory mean trace correction.
    pub max_trace_correction: f64,
}

impl EnsembleStats {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.observables.iter().position(|o| o == name)
    }
}

/// Runs `spec.m` trajectories in parallel and reduces them in index order,
/// so results do not depend on the number of workers.
pub fn run_ensemble<T: Trajectory>(model: &T, spec: &EnsembleSpec, seed: u64) -> Result<EnsembleStats> {
    spec.validate()?;
    let records: Vec<Result<TrajectoryRecord>> = (0..spec.m as u64)
        .into_par_iter()
        .map(|k| run_trajectory(model, spec, seed, k))
        .collect();
    let times = spec.record_times();
    let names = model.observables();
    let width = names.len();
    let mut sum = vec![vec![0.0; width]; times.len()];
    let mut sq = vec![vec![0.0; width]; times.len()];
    let mut worst = 0.0f64;
    for rec in records {
        let rec = rec?;
        worst = worst.max(rec.mean_trace_correction);
        for (i, row) in rec.samples.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                sum[i][j] += v;
                sq[i][j] += v * v;
            }
        }
    }
    let m = spec.m as f64;
    let mean: Vec<Vec<f64>> = sum.iter().map(|r| r.iter().map(|s| s / m).collect()).collect();
    let std_err = sq
        .iter()
        .zip(&mean)
        .map(|(r, mu)| {
            r.iter()
                .zip(mu)
                .map(|(s, u)| {
                    if spec.m < 2 {
                        0.0
                    } else {
                        ((s / m - u * u).max(0.0) * m / (m - 1.0) / m).sqrt()
                    }
                })
                .collect()
        })
        .collect();
    Ok(EnsembleStats {
        observables: names,
        times,
        mean,
        std_err,
        trajectories: spec.m,
        max_trace_correction: worst,
    })
}

/// `Tr(Aμ)` for row-major flattened `μ`.
fn expect_flat(a: &SparseOp, x: &[C64], n: usize) -> C64 {
    a.iter().map(|(m, k, v)| v * x[k * n + m]).sum()
}

fn purity_flat(x: &[C64]) -> f64 {
    // Tr μ² = Σ |μ_mq|² for Hermitian μ
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub const REDUCED_OBSERVABLES: [&str; 7] = ["n", "z", "p", "p2", "var_p", "purity", "current"];

/// Reduced-model trajectory, optionally with direct feedback.
#[derive(Debug, Clone)]
pub struct ReducedTrajectory {
    unraveling: Unraveling,
    initial: Vec<C64>,
    feedback: Option<(FeedbackParams, f64, FeedbackKick)>,
    n_op: SparseOp,
    z: SparseOp,
    p: SparseOp,
    p2: SparseOp,
}

pub struct ReducedTrajectoryState {
    x: Vec<C64>,
    scratch: StepScratch,
    kick: Option<FeedbackKick>,
}

impl ReducedTrajectory {
    pub fn new(model: &ReducedModel, unraveling: Unraveling, initial: &CMat) -> Self {
        let p = model.ops().p.matrix();
        ReducedTrajectory {
            unraveling,
            initial: flatten(initial),
            feedback: None,
            n_op: model.number().clone(),
            z: model.z().clone(),
            p: model.p().clone(),
            p2: SparseOp::from_dense(&(p * p)),
        }
    }

    /// Applies the feedback kick with efficiency `epsilon` after every step.
    pub fn with_feedback(mut self, model: &ReducedModel, fb: FeedbackParams, epsilon: f64) -> Self {
        self.feedback = Some((fb, epsilon, FeedbackKick::new(model)));
        self
    }

    pub fn space(&self) -> &FockSpace {
        self.unraveling.space()
    }
}

impl Trajectory for ReducedTrajectory {
    type State = ReducedTrajectoryState;

    fn observables(&self) -> Vec<String> {
        REDUCED_OBSERVABLES.iter().map(|s| s.to_string()).collect()
    }

    fn initial(&self) -> Self::State {
        ReducedTrajectoryState {
            x: self.initial.clone(),
            scratch: StepScratch::new(self.space().dim()),
            kick: self.feedback.as_ref().map(|f| f.2.clone()),
        }
    }

    fn step(&self, state: &mut Self::State, dw: f64, dt: f64) -> Result<(f64, f64)> {
        let info = self
            .unraveling
            .step_flat(&mut state.x, dw, dt, &mut state.scratch)?;
        if let (Some((fb, eps, _)), Some(kick)) = (&self.feedback, state.kick.as_mut()) {
            kick.apply_flat(&mut state.x, kick_angle(fb, *eps, info.current, dt));
        }
        Ok((info.current, info.trace_correction))
    }

    fn observe(&self, state: &Self::State, current: f64, out: &mut Vec<f64>) {
        let n = self.space().dim();
        let x = &state.x;
        out.push(expect_flat(&self.n_op, x, n).re);
        out.push(expect_flat(&self.z, x, n).re);
        let p = expect_flat(&self.p, x, n).re;
        let p2 = expect_flat(&self.p2, x, n).re;
        out.push(p);
        out.push(p2);
        out.push(p2 - p * p);
        out.push(purity_flat(x));
        out.push(current);
    }
}

pub const FULL_OBSERVABLES: [&str; 5] = ["n", "p2", "excited", "purity", "current"];

/// Full three-level trajectory with the collected probe channel unravelled.
#[derive(Debug, Clone)]
pub struct FullTrajectory {
    model: FullModel,
    initial: FullState,
    epsilon: f64,
    phi: f64,
    n_op: CMat,
    p2: CMat,
}

impl FullTrajectory {
    pub fn new(model: FullModel, initial: FullState, epsilon: f64, phi: f64) -> Self {
        let ops = crate::hilbert::ladder_ops(&model.trap().space);
        let p = ops.p.matrix();
        FullTrajectory {
            n_op: ops.n.matrix().clone(),
            p2: p * p,
            model,
            initial,
            epsilon,
            phi,
        }
    }
}

impl Trajectory for FullTrajectory {
    type State = FullState;

    fn observables(&self) -> Vec<String> {
        FULL_OBSERVABLES.iter().map(|s| s.to_string()).collect()
    }

    fn initial(&self) -> FullState {
        self.initial.clone()
    }

    fn step(&self, state: &mut FullState, dw: f64, dt: f64) -> Result<(f64, f64)> {
        let (next, current) = self.model.conditioned_step(state, self.epsilon, self.phi, dw, dt)?;
        *state = next;
        // the full-model step does not expose its trace correction
        Ok((current, 0.0))
    }

    fn observe(&self, state: &FullState, current: f64, out: &mut Vec<f64>) {
        let mu = state.motional();
        out.push(crate::hilbert::expect(&self.n_op, &mu).re);
        out.push(crate::hilbert::expect(&self.p2, &mu).re);
        out.push(state.population(crate::full_model::E));
        out.push(crate::hilbert::purity(state.matrix()));
        out.push(current);
    }
}

/// Richardson-style ratio `(X(dt) − X(dt/2)) / (X(dt/2) − X(dt/4))`; close to
/// 2 for a first-order weak scheme.
pub fn weak_order_ratio(coarse: f64, mid: f64, fine: f64) -> f64 {
    (coarse - mid) / (mid - fine)
}

/// Final-time ensemble means of observable `column` at steps `dt`, `dt/2`,
/// …, `dt/2^levels`. Each trajectory uses one Brownian path sampled at the
/// finest step; coarser increments are sums of consecutive fine ones, so the
/// differences between levels carry little sampling noise.
pub fn refined_means<T: Trajectory>(
    model: &T,
    spec: &EnsembleSpec,
    seed: u64,
    levels: u32,
    column: usize,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let fine = 1usize << levels;
    let steps = spec.steps();
    let per_traj: Vec<Result<Vec<f64>>> = (0..spec.m as u64)
        .into_par_iter()
        .map(|index| {
            let mut noise = NoiseStream::new(seed, index);
            let path: Vec<f64> = (0..steps * fine)
                .map(|_| wiener_increment(&mut noise, spec.dt / fine as f64))
                .collect();
            (0..=levels)
                .map(|level| {
                    let sub = 1usize << level;
                    let group = fine / sub;
                    let dt = spec.dt / sub as f64;
                    let mut state = model.initial();
                    let mut current = 0.0;
                    for k in 0..steps * sub {
                        let dw: f64 = path[k * group..(k + 1) * group].iter().sum();
                        current = model
                            .step(&mut state, dw, dt)
                            .map_err(|e| Error::Trajectory {
                                index,
                                position: (k * group) as u64,
                                source: Box::new(e),
                            })?
                            .0;
                    }
                    let mut row = Vec::new();
                    model.observe(&state, current, &mut row);
                    Ok(row[column])
                })
                .collect()
        })
        .collect();
    let mut sums = vec![0.0; levels as usize + 1];
    for r in per_traj {
        for (s, v) in sums.iter_mut().zip(r?) {
            *s += v;
        }
    }
    Ok(sums.iter().map(|s| s / spec.m as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::full_model::TrapParams;
    use crate::hilbert::{coherent_density, fock_density};

    #[test]
    fn wiener_moments() {
        let mut s = NoiseStream::new(7, 3);
        let dt = 0.01;
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let w = wiener_increment(&mut s, dt);
            sum += w;
            sq += w * w;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() <= 4.0 * (dt / n as f64).sqrt());
        assert!((0.994..=1.006).contains(&(var / dt)), "{}", var / dt);
    }

    #[test]
    fn stream_is_reproducible_and_seekable() {
        let mut a = NoiseStream::new(11, 5);
        let mut b = NoiseStream::new(11, 5);
        let xs: Vec<f64> = (0..100).map(|_| a.gaussian()).collect();
        let ys: Vec<f64> = (0..100).map(|_| b.gaussian()).collect();
        assert_eq!(xs, ys);
        let mut c = NoiseStream::at(11, 5, 60);
        assert_eq!(c.gaussian(), xs[60]);
        let mut d = NoiseStream::new(11, 6);
        assert_ne!(d.gaussian(), xs[0]);
    }

    fn small_run() -> (ReducedTrajectory, EnsembleSpec) {
        let trap = TrapParams::new(1.0, FockSpace::new(10).unwrap()).unwrap();
        let model = ReducedModel::new(&trap);
        let u = model.resonant(0.2, 0.5).unwrap();
        let t = ReducedTrajectory::new(&model, u, &coherent_density(10, C64::new(0.5, 0.0)))
            .with_feedback(&model, FeedbackParams::new(1.0).unwrap(), 0.5);
        let spec = EnsembleSpec {
            m: 8,
            dt: 0.01,
            t: 0.5,
            record_stride: 10,
        };
        (t, spec)
    }

    #[test]
    fn single_trajectory_ensemble_equals_trajectory() {
        let (t, mut spec) = small_run();
        spec.m = 1;
        let stats = run_ensemble(&t, &spec, 3).unwrap();
        let rec = run_trajectory(&t, &spec, 3, 0).unwrap();
        assert_eq!(stats.mean, rec.samples);
        assert!(stats.std_err.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn ensemble_is_independent_of_worker_count() {
        let (t, spec) = small_run();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_ensemble(&t, &spec, 9).unwrap());
        let b = three.install(|| run_ensemble(&t, &spec, 9).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.times.len(), 6);
        assert!(a.max_trace_correction < 1e-12);
    }

    #[test]
    fn failures_carry_replay_position() {
        let trap = TrapParams::new(1.0, FockSpace::new(6).unwrap()).unwrap();
        let model = ReducedModel::new(&trap);
        let u = model.resonant(0.2, 0.5).unwrap();
        let t = ReducedTrajectory::new(&model, u, &fock_density(6, 5));
        let spec = EnsembleSpec {
            m: 3,
            dt: 0.01,
            t: 0.1,
            record_stride: 1,
        };
        match run_ensemble(&t, &spec, 1) {
            Err(Error::Trajectory { index, position, source }) => {
                assert_eq!(index, 0);
                assert_eq!(position, 0);
                assert!(matches!(*source, Error::Cutoff { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_step_bounds_fastest_rate() {
        let dt = default_dt(1.0, 0.01, 1.0, 0.3, Some(2.0));
        assert!((dt - 0.0025).abs() < 1e-15);
        let dt = default_dt(1.0, 0.0, 0.0, 0.3, None);
        assert!((dt - 0.005).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        let bad = EnsembleSpec {
            m: 0,
            dt: 0.1,
            t: 1.0,
            record_stride: 1,
        };
        assert!(bad.validate().is_err());
        let bad = EnsembleSpec { m: 1, dt: 0.1, t: 0.01, record_stride: 1 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn weak_error_is_first_order() {
        let trap = TrapParams::new(1.0, FockSpace::new(22).unwrap()).unwrap();
        let model = ReducedModel::new(&trap);
        let u = model.resonant(0.5, 0.5).unwrap();
        let t = ReducedTrajectory::new(&model, u, &coherent_density(22, C64::new(0.7, 0.0)))
            .with_feedback(&model, FeedbackParams::new(1.0).unwrap(), 0.5);
        let spec = EnsembleSpec {
            m: 64,
            dt: 0.04,
            t: 1.0,
            record_stride: 1,
        };
        let x = refined_means(&t, &spec, 5, 2, 1).unwrap();
        let ratio = weak_order_ratio(x[0], x[1], x[2]);
        assert!((1.0..=4.0).contains(&ratio), "ratio {ratio}, means {x:?}");
    }
}
