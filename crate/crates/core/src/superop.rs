// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Sparse operators and Liouville-space superoperators.
//!
//! Density matrices are flattened row-major: entry `μ[m, q]` sits at index
//! `m·n + q`. A term `c·A μ B` contributes `c·A[m, k]·B[l, q]` at row `m·n + q`,
//! column `k·n + l`.

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::hilbert::hermitize;
use crate::{CMat, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Entries below this fraction of the largest magnitude are dropped when a
/// dense operator is sparsified.
pub const DROP_TOL: f64 = 1e-16;

/// Row-compressed square operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub fn identity(dim: usize) -> Self {
        SparseOp {
            dim,
            rows: (0..dim).map(|i| vec![(i, C64::new(1.0, 0.0))]).collect(),
        }
    }

    pub fn from_dense(m: &CMat) -> Self {
        assert!(m.is_square());
        let dim = m.nrows();
        let max = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let cut = DROP_TOL * max;
        let rows = (0..dim)
            .map(|i| {
                (0..dim)
                    .filter_map(|j| {
                        let v = m[(i, j)];
                        (v.norm() > cut).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        SparseOp { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> SparseOp {
        let mut rows = vec![Vec::new(); self.dim];
        for (i, j, v) in self.iter() {
            rows[j].push((i, v.conj()));
        }
        SparseOp {
            dim: self.dim,
            rows,
        }
    }

    /// `A x`.
    pub fn left_mul(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            for (i, row) in self.rows.iter().enumerate() {
                let mut s = ZERO;
                for &(k, v) in row {
                    s += v * col[k];
                }
                out[(i, c)] = s;
            }
        }
        out
    }

    /// `A x` for a square `x` flattened row-major with side `n`.
    pub fn left_mul_flat(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim;
        for (m, row) in self.rows.iter().enumerate() {
            let dst = &mut out[m * n..(m + 1) * n];
            dst.fill(ZERO);
            for &(k, v) in row {
                let src = &x[k * n..(k + 1) * n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    }

    /// `x A`.
    pub fn right_mul(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(x.nrows(), self.dim);
        for (k, row) in self.rows.iter().enumerate() {
            let src = x.column(k).into_owned();
            for &(j, v) in row {
                let mut dst = out.column_mut(j);
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += v * s;
                }
            }
        }
        out
    }
}

/// Accumulates superoperator entries before compression.
#[derive(Debug, Clone)]
pub struct SuperopBuilder {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SuperopBuilder {
    pub fn new(n: usize) -> Self {
        SuperopBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&mut self, row: usize, col: usize, v: C64) -> &mut Self {
        if v != ZERO {
            self.entries.push((row, col, v));
        }
        self
    }

    /// `c · A μ B`; `None` stands for the identity.
    pub fn sandwich(&mut self, c: C64, a: Option<&SparseOp>, b: Option<&SparseOp>) -> &mut Self {
        let n = self.n;
        let id = SparseOp::identity(n);
        let a = a.unwrap_or(&id);
        let b = b.unwrap_or(&id);
        for (m, k, av) in a.iter() {
            for (l, q, bv) in b.iter() {
                self.entry(m * n + q, k * n + l, c * av * bv);
            }
        }
        self
    }

    /// `−i[H, μ]`.
    pub fn hamiltonian(&mut self, h: &SparseOp) -> &mut Self {
        let mi = C64::new(0.0, -1.0);
        self.sandwich(mi, Some(h), None).sandwich(-mi, None, Some(h))
    }

    /// `c·[A, μ]`.
    pub fn commutator(&mut self, c: C64, a: &SparseOp) -> &mut Self {
        self.sandwich(c, Some(a), None).sandwich(-c, None, Some(a))
    }

    /// `c·[A, [A, μ]]` for Hermitian `A`.
    pub fn double_commutator(&mut self, c: C64, a: &SparseOp) -> &mut Self {
        let a2 = SparseOp::from_dense(&(a.to_dense() * a.to_dense()));
        self.sandwich(c, Some(&a2), None)
            .sandwich(c, None, Some(&a2))
            .sandwich(-2.0 * c, Some(a), Some(a))
    }

    /// `rate · D[L]μ = rate (LμL† − ½{L†L, μ})`.
    pub fn dissipator(&mut self, rate: f64, l: &SparseOp) -> &mut Self {
        let ld = l.adjoint();
        let ldl = SparseOp::from_dense(&(ld.to_dense() * l.to_dense()));
        let r = C64::new(rate, 0.0);
        self.sandwich(r, Some(l), Some(&ld))
            .sandwich(-0.5 * r, Some(&ldl), None)
            .sandwich(-0.5 * r, None, Some(&ldl))
    }

    pub fn build(mut self) -> Superop {
        let n2 = self.n * self.n;
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n2 + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("merged entry") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n2 {
            row_ptr[r + 1] += row_ptr[r];
        }
        Superop {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Compressed-row superoperator on `n × n` matrices.
#[derive(Debug, Clone)]
pub struct Superop {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Superop {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = L x` on flattened matrices.
    pub fn apply_vec(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = ZERO;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[idx] * x[self.cols[idx]];
            }
            *o = s;
        }
    }

    pub fn apply(&self, mu: &CMat) -> CMat {
        let x = flatten(mu);
        let mut out = vec![ZERO; x.len()];
        self.apply_vec(&x, &mut out);
        unflatten(self.n, &out)
    }

    /// Largest `|Tr(L X)|` over matrix units `X`; zero for trace-preserving maps.
    pub fn trace_defect(&self) -> f64 {
        let n = self.n;
        let mut sums = vec![ZERO; n * n];
        for m in 0..n {
            let r = m * n + m;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                sums[self.cols[idx]] += self.vals[idx];
            }
        }
        sums.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Lower and upper bandwidths of the flattened matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for r in 0..self.n * self.n {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[idx];
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    /// Null vector normalised to unit trace, found by replacing the `μ[0, 0]`
    /// equation with `μ[0, 0] = 1`. Requires the steady state to populate
    /// `|0⟩⟨0|`.
    pub fn steady_state(&self) -> Result<CMat> {
        let n = self.n;
        let n2 = n * n;
        let (kl, ku) = self.bandwidths();
        let mut band = BandedMatrix::zeros(n2, kl, ku);
        for r in 1..n2 {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                band.add(r, self.cols[idx], self.vals[idx]);
            }
        }
        band.add(0, 0, C64::new(1.0, 0.0));
        let mut rhs = vec![ZERO; n2];
        rhs[0] = C64::new(1.0, 0.0);
        let x = band.solve(rhs)?;
        let mut mu = unflatten(n, &x);
        hermitize(&mut mu);
        let tr = mu.trace().re;
        if !tr.is_finite() || tr <= 0.0 {
            return Err(Error::Singular(format!(
                "steady-state solve returned trace {tr}"
            )));
        }
        Ok(mu / C64::new(tr, 0.0))
    }
}

pub fn flatten(mu: &CMat) -> Vec<C64> {
    let n = mu.nrows();
    let mut v = Vec::with_capacity(n * mu.ncols());
    for m in 0..n {
        for q in 0..mu.ncols() {
            v.push(mu[(m, q)]);
        }
    }
    v
}

pub fn unflatten(n: usize, v: &[C64]) -> CMat {
    CMat::from_row_slice(n, n, v)
}
