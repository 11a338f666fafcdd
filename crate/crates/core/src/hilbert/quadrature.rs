// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

pub const DEFAULT_QUADRATURE_ORDER: usize = 32;

/// Gauss–Legendre rule on `u = cos(angle) ∈ [−1, 1]` paired with the dipole
/// emission pattern `N(u) = 3/8 (1 + u²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for AngularQuadrature {
    fn default() -> Self {
        Self::new(DEFAULT_QUADRATURE_ORDER).expect("default order is valid")
    }
}

impl AngularQuadrature {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("quadrature_order", "must be positive"));
        }
        let (nodes, weights) = gauss_legendre(order);
        Ok(AngularQuadrature {
            order,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Dipole distribution of emitted photons.
    pub fn dipole(u: f64) -> f64 {
        0.375 * (1.0 + u * u)
    }

    /// `(u_k, w_k N(u_k))` pairs.
    pub fn weighted_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| (u, w * Self::dipole(u)))
    }

    /// `∫ N(u) f(u) du`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weighted_nodes().map(|(u, w)| w * f(u)).sum()
    }

    /// Difference between this rule and the rule of twice the order.
    pub fn doubling_error(&self, f: impl Fn(f64) -> f64) -> f64 {
        let fine = AngularQuadrature::new(2 * self.order).expect("positive order");
        (self.integrate(&f) - fine.integrate(&f)).abs()
    }
}

/// `½ ∫ N(u) (u − 1)² du`, the recoil heating constant (exactly 7/10).
pub fn alpha_tilde(quad: &AngularQuadrature) -> f64 {
    0.5 * quad.integrate(|u| (u - 1.0) * (u - 1.0))
}

/// `½ ∫ N(u) u² du` (exactly 1/5), the recoil constant without the
/// absorption shift.
pub fn alpha_prime(quad: &AngularQuadrature) -> f64 {
    0.5 * quad.integrate(|u| u * u)
}

/// Gauss–Legendre nodes and weights by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dipole_normalisation() {
        for order in [4, 8, 32, 64] {
            let q = AngularQuadrature::new(order).unwrap();
            assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-12, "order {order}");
        }
    }

    #[test]
    fn alpha_tilde_is_seven_tenths() {
        assert!((alpha_tilde(&AngularQuadrature::default()) - 0.7).abs() < 1e-12);
        // degree-4 integrand, exact for four Gauss points
        assert!((alpha_tilde(&AngularQuadrature::new(4).unwrap()) - 0.7).abs() < 1e-12);
        assert!((alpha_prime(&AngularQuadrature::default()) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn weights_positive_and_nodes_sorted() {
        let q = AngularQuadrature::new(7).unwrap();
        assert!(q.weights().iter().all(|&w| w > 0.0));
        assert!(q.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(q.nodes()[3].abs() < 1e-15);
        let s: f64 = q.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn doubling_check_small_for_smooth_integrand() {
        let q = AngularQuadrature::default();
        assert!(q.doubling_error(|u| (0.3 * u).cos()) < 1e-14);
    }
}
