// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! One-dimensional minimisation: grid bracketing followed by golden-section
//! refinement.

use serde::Serialize;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// The minimum sits on an edge of the search interval, so no interior
    /// minimum was found.
    pub at_boundary: bool,
}

/// Golden-section search on `[a, b]`, stopping when the bracket is narrower
/// than `tol · (1 + |x|)`. Assumes `f` is unimodal on the interval.
pub fn golden_section(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let (lo, hi) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol * (1.0 + 0.5 * (a + b).abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (mut x, mut value) = if fc <= fd { (c, fc) } else { (d, fd) };
    for edge in [lo, hi] {
        let fe = f(edge);
        if fe < value {
            x = edge;
            value = fe;
        }
    }
    let span = tol * (1.0 + x.abs());
    Minimum {
        x,
        value,
        at_boundary: (x - lo).abs() <= span || (hi - x).abs() <= span,
    }
}

/// Scans `points` evenly spaced values on `[lo, hi]`, then refines around the
/// best one by golden section. Non-finite objective values lose every
/// comparison.
pub fn minimize_bracketed(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
) -> Minimum {
    let points = points.max(3);
    let h = (hi - lo) / (points - 1) as f64;
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let (best, _) = (0..points)
        .map(|k| (k, key(f(lo + k as f64 * h))))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let a = lo + best.saturating_sub(1) as f64 * h;
    let b = lo + (best + 1).min(points - 1) as f64 * h;
    let mut m = golden_section(|x| key(f(x)), a, b, tol);
    let span = tol * (1.0 + m.x.abs());
    m.at_boundary = (m.x - lo).abs() <= span || (hi - m.x).abs() <= span;
    m
}

/// Minimum of a function with period `period`, reported in `[0, period)`.
pub fn minimize_periodic(f: impl Fn(f64) -> f64, period: f64, points: usize, tol: f64) -> Minimum {
    let points = points.max(3);
    let h = period / points as f64;
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let (best, _) = (0..points)
        .map(|k| (k, key(f(k as f64 * h))))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let centre = best as f64 * h;
    let m = golden_section(|x| key(f(x)), centre - h, centre + h, tol);
    Minimum {
        x: m.x.rem_euclid(period),
        value: m.value,
        at_boundary: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_vertex() {
        let m = golden_section(|x| (x - 1.3).powi(2) + 2.0, -4.0, 5.0, 1e-10);
        assert!((m.x - 1.3).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-15);
        assert!(!m.at_boundary);
    }

    #[test]
    fn monotone_objective_flags_boundary() {
        let m = minimize_bracketed(|x| x, 0.5, 3.0, 20, 1e-8);
        assert!(m.at_boundary);
        assert_eq!(m.x, 0.5);
    }

    #[test]
    fn bracketing_finds_global_minimum_of_multimodal() {
        let f = |x: f64| (3.0 * x).cos() + 0.1 * x;
        let m = minimize_bracketed(f, 0.0, 10.0, 200, 1e-10);
        // stationary where sin 3x = 1/30; the tilt favours the leftmost well
        let want = (std::f64::consts::PI - (0.1f64 / 3.0).asin()) / 3.0;
        assert!((m.x - want).abs() < 1e-6, "{}", m.x);
    }

    #[test]
    fn periodic_minimum_wraps() {
        let f = |x: f64| -(x - 0.01).cos();
        let m = minimize_periodic(f, std::f64::consts::TAU, 16, 1e-10);
        assert!((m.x - 0.01).abs() < 1e-6);
        let g = |x: f64| -(x + 0.01).cos();
        let m = minimize_periodic(g, std::f64::consts::TAU, 16, 1e-10);
        assert!((m.x - (std::f64::consts::TAU - 0.01)).abs() < 1e-6);
    }

    #[test]
    fn infinite_values_are_avoided() {
        let f = |x: f64| if x < 1.0 { f64::INFINITY } else { (x - 2.0).powi(2) };
        let m = minimize_bracketed(f, 0.0, 4.0, 17, 1e-9);
        assert!((m.x - 2.0).abs() < 1e-6);
    }
}
