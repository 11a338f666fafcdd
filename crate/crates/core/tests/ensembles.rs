// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

use eitlab_core::hilbert::{coherent_density, expect, thermal_density};
use eitlab_core::ode::evolve_checkpoints;
use eitlab_core::reduced::StepScratch;
use eitlab_core::sde::{run_ensemble, wiener_increment, ReducedTrajectory, Trajectory};
use eitlab_core::superop::flatten;
use eitlab_core::{EnsembleSpec, FockSpace, NoiseStream, ReducedModel, TrapParams, C64};

fn model(n: usize) -> ReducedModel {
    ReducedModel::new(&TrapParams::new(1.0, FockSpace::new(n).unwrap()).unwrap())
}

#[test]
fn ensemble_mean_follows_unconditioned_equation() {
    let n = 24;
    let m = model(n);
    let (g0, eps) = (0.3, 0.6);
    let mu0 = coherent_density(n, C64::new(0.8, 0.0));
    let u = m.resonant(g0, eps).unwrap();
    let op = m.lamb_dicke_generator(g0);
    let traj = ReducedTrajectory::new(&m, u, &mu0);
    let spec = EnsembleSpec {
        m: 200,
        dt: 0.005,
        t: 2.0,
        record_stride: 50,
    };
    let stats = run_ensemble(&traj, &spec, 42).unwrap();
    let me = evolve_checkpoints(&op, &mu0, &stats.times[1..], 0.005);
    let (cn, cz) = (stats.column("n").unwrap(), stats.column("z").unwrap());
    for (k, mu) in me.iter().enumerate() {
        let row = k + 1;
        let n_want = expect(m.ops().n.matrix(), mu).re;
        let z_want = expect(m.ops().z.matrix(), mu).re;
        assert!((stats.mean[row][cn] - n_want).abs() <= 3.0 * stats.std_err[row][cn] + 1e-3);
        assert!((stats.mean[row][cz] - z_want).abs() <= 3.0 * stats.std_err[row][cz] + 1e-3);
    }
}

#[test]
fn current_signal_at_fixed_state() {
    let n = 16;
    let m = model(n);
    let (g0, eps, dt) = (0.4, 0.7, 1e-3);
    let u = m.resonant(g0, eps).unwrap();
    let mu = coherent_density(n, C64::new(0.2, 0.5));
    let x0 = flatten(&mu);
    let mut scratch = StepScratch::new(n);
    let mut noise = NoiseStream::new(3, 0);
    let samples = 10_000;
    let mut sum = 0.0;
    for _ in 0..samples {
        let mut x = x0.clone();
        let dw = wiener_increment(&mut noise, dt);
        sum += u.step_flat(&mut x, dw, dt, &mut scratch).unwrap().current;
    }
    let kappa = eps * g0;
    let p = expect(m.ops().p.matrix(), &mu).re;
    let sigma = (kappa / dt).sqrt() / (samples as f64).sqrt();
    assert!((sum / samples as f64 - 2.0 * kappa * p).abs() < 3.0 * sigma);
}

#[test]
fn purity_never_drops_for_perfect_momentum_readout() {
    let n = 30;
    let m = model(n).with_frequency(0.0).unwrap();
    let u = m.resonant(1.0, 1.0).unwrap();
    let traj = ReducedTrajectory::new(&m, u, &thermal_density(n, 0.5));
    let purity = traj.observables().iter().position(|o| o == "purity").unwrap();
    let dt = 1e-3;
    for index in 0..5 {
        let mut noise = NoiseStream::new(17, index);
        let mut state = traj.initial();
        let mut row = Vec::new();
        traj.observe(&state, 0.0, &mut row);
        let start = row[purity];
        let mut last = start;
        for _ in 0..1000 {
            let (current, _) = traj.step(&mut state, wiener_increment(&mut noise, dt), dt).unwrap();
            row.clear();
            traj.observe(&state, current, &mut row);
            // Euler–Maruyama fluctuations are O(κ dt)
            assert!(row[purity] >= last - 2.0 * dt, "{} < {last}", row[purity]);
            last = row[purity];
        }
        assert!(last > start + 0.2, "{start} -> {last}");
    }
}

#[test]
fn standard_error_scales_as_inverse_root_m() {
    // four times the trajectories halves the standard error
    let n = 16;
    let m = model(n);
    let u = m.resonant(0.3, 0.5).unwrap();
    let traj = ReducedTrajectory::new(&m, u, &coherent_density(n, C64::new(0.5, 0.0)));
    let spec = |count| EnsembleSpec {
        m: count,
        dt: 0.01,
        t: 1.0,
        record_stride: 100,
    };
    let small = run_ensemble(&traj, &spec(100), 8).unwrap();
    let large = run_ensemble(&traj, &spec(400), 9).unwrap();
    let col = small.column("p").unwrap();
    let ratio = small.std_err[1][col] / large.std_err[1][col];
    assert!((ratio - 2.0).abs() <= 0.6, "ratio {ratio}");
}
