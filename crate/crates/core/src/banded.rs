// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Banded complex linear systems solved by Gaussian elimination with partial
//! pivoting.

use crate::error::{Error, Result};
use crate::C64;

/// Square matrix with `kl` sub-diagonals and `ku` super-diagonals.
///
/// Row `i` stores columns `i − kl ..= i + kl + ku`; the extra `kl` columns hold
/// the fill-in produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![C64::new(0.0, 0.0); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.kl + self.ku {
            return None;
        }
        Some(i * self.width + j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j)
            .map(|s| self.data[s])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Adds `v` to entry `(i, j)`. Panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band ({}, {})",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j).expect("inside matrix");
        self.data[s] += v;
    }

    /// Clears row `i` within its band.
    pub fn clear_row(&mut self, i: usize) {
        let w = self.width;
        self.data[i * w..(i + 1) * w].fill(C64::new(0.0, 0.0));
    }

    /// Solves `A x = b`, consuming the matrix.
    pub fn solve(mut self, mut b: Vec<C64>) -> Result<Vec<C64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let (kl, ku, w) = (self.kl, self.ku, self.width);
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..=last {
                let v = self.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j).expect("band");
                    let c = self.slot(p, j).expect("band");
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            let pivot = self.data[k * w + kl];
            let len = jmax - k;
            for i in k + 1..=last {
                let sik = i * w + k + kl - i;
                let f = self.data[sik] / pivot;
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                self.data[sik] = C64::new(0.0, 0.0);
                let src = k * w + kl + 1;
                let dst = i * w + k + 1 + kl - i;
                let (head, tail) = self.data.split_at_mut(dst);
                let row_k = &head[src..src + len];
                for (x, &y) in tail[..len].iter_mut().zip(row_k) {
                    *x -= f * y;
                }
                let bk = b[k];
                b[i] -= f * bk;
            }
        }
        let mut x = b;
        for i in (0..n).rev() {
            let jmax = (i + kl + ku).min(n - 1);
            let base = i * w + kl - i;
            let mut s = x[i];
            for j in i + 1..=jmax {
                s -= self.data[base + j] * x[j];
            }
            x[i] = s / self.data[base + i];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CMat;
    use nalgebra::DVector;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> (BandedMatrix, CMat) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut band = BandedMatrix::zeros(n, kl, ku);
        let mut dense = CMat::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v = C64::new(next(), next()) * if i == j { 0.01 } else { 1.0 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        (band, dense)
    }

    #[test]
    fn matches_dense_solve() {
        for (n, kl, ku) in [(1, 0, 0), (7, 1, 1), (40, 3, 5), (60, 7, 2)] {
            let (band, dense) = random_banded(n, kl, ku, n as u64);
            let b: Vec<C64> = (0..n).map(|k| C64::new(k as f64, 1.0)).collect();
            let x = band.solve(b.clone()).unwrap();
            let want = dense.clone().lu().solve(&DVector::from_vec(b)).unwrap();
            for k in 0..n {
                assert!((x[k] - want[k]).norm() < 1e-9 * (1.0 + want[k].norm()));
            }
        }
    }

    #[test]
    fn singular_detected() {
        let mut m = BandedMatrix::zeros(3, 1, 1);
        m.add(0, 0, C64::new(1.0, 0.0));
        m.add(1, 0, C64::new(1.0, 0.0));
        assert!(m.solve(vec![C64::new(1.0, 0.0); 3]).is_err());
    }

    #[test]
    #[should_panic]
    fn out_of_band_insert_panics() {
        BandedMatrix::zeros(5, 1, 1).add(0, 3, C64::new(1.0, 0.0));
    }
}
