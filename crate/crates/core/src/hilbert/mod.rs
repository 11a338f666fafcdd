// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Truncated harmonic-oscillator and three-level operator algebra.
//!
//! Motional operators live on the Fock states `|0⟩..|N−1⟩`. Position and
//! momentum are dimensionless, `ẑ = (â + â†)/√2` and `p̂ = i(â† − â)/√2`.
//! The spectral decomposition of the truncated `ẑ` is computed once per
//! [`FockSpace`] and shared by every recoil kernel built on that space.

mod quadrature;
mod recoil;

pub use quadrature::{alpha_prime, alpha_tilde, AngularQuadrature, DEFAULT_QUADRATURE_ORDER};
pub use recoil::{angular_average, recoil_kernel, RecoilMap, ShiftMode};

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Edge-band population above which evolution is aborted.
pub const EDGE_POPULATION_LIMIT: f64 = 1e-6;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Eigen-decomposition of the truncated position operator.
#[derive(Debug)]
pub struct ZSpectrum {
    /// Eigenvalues (the Gauss–Hermite nodes scaled to the oscillator units).
    pub values: DVector<f64>,
    /// Orthogonal eigenvector matrix, one eigenvector per column.
    pub vectors: DMatrix<f64>,
    /// `vectors` promoted to complex entries.
    pub vectors_c: CMat,
}

/// Truncated motional Hilbert space with a cached spectrum of `ẑ`.
#[derive(Clone)]
pub struct FockSpace {
    cutoff: usize,
    edge_band: usize,
    spectrum: Arc<OnceLock<ZSpectrum>>,
}

impl fmt::Debug for FockSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockSpace")
            .field("cutoff", &self.cutoff)
            .field("edge_band", &self.edge_band)
            .finish()
    }
}

impl PartialEq for FockSpace {
    fn eq(&self, other: &Self) -> bool {
        self.cutoff == other.cutoff && self.edge_band == other.edge_band
    }
}

impl FockSpace {
    /// Space with `cutoff` levels and the default edge band `⌈N/10⌉`.
    pub fn new(cutoff: usize) -> Result<Self> {
        Self::with_edge_band(cutoff, cutoff.div_ceil(10))
    }

    pub fn with_edge_band(cutoff: usize, edge_band: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::invalid("fock_cutoff", "must be at least 2"));
        }
        if edge_band < 1 || edge_band >= cutoff {
            return Err(Error::invalid(
                "edge_band",
                format!("must satisfy 1 <= edge_band < cutoff ({cutoff}), got {edge_band}"),
            ));
        }
        Ok(FockSpace {
            cutoff,
            edge_band,
            spectrum: Arc::new(OnceLock::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.cutoff
    }

    pub fn edge_band(&self) -> usize {
        self.edge_band
    }

    /// Spectrum of the truncated `ẑ`, computed on first use.
    pub fn z_spectrum(&self) -> &ZSpectrum {
        self.spectrum.get_or_init(|| {
            let n = self.cutoff;
            let mut z = DMatrix::<f64>::zeros(n, n);
            for k in 1..n {
                let v = (k as f64).sqrt() / std::f64::consts::SQRT_2;
                z[(k - 1, k)] = v;
                z[(k, k - 1)] = v;
            }
            let eig = SymmetricEigen::new(z);
            let vectors_c = eig.eigenvectors.map(|x| C64::new(x, 0.0));
            ZSpectrum {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
                vectors_c,
            }
        })
    }

    /// Total population of the top `edge_band` Fock levels of `rho`.
    pub fn edge_population(&self, rho: &CMat) -> f64 {
        let n = self.cutoff;
        (n - self.edge_band..n).map(|k| rho[(k, k)].re).sum()
    }

    /// Fails with [`Error::Cutoff`] when the edge band holds more than
    /// [`EDGE_POPULATION_LIMIT`].
    pub fn guard(&self, rho: &CMat) -> Result<()> {
        let population = self.edge_population(rho);
        if population > EDGE_POPULATION_LIMIT {
            return Err(Error::Cutoff {
                cutoff: self.cutoff,
                population,
                threshold: EDGE_POPULATION_LIMIT,
            });
        }
        Ok(())
    }

    /// Same as [`FockSpace::guard`] for a state on `C^k ⊗ Fock`, summing the
    /// edge band over all internal levels.
    pub fn guard_product(&self, rho: &CMat, internal: usize) -> Result<()> {
        let n = self.cutoff;
        let mut population = 0.0;
        for i in 0..internal {
            for k in n - self.edge_band..n {
                population += rho[(i * n + k, i * n + k)].re;
            }
        }
        if population > EDGE_POPULATION_LIMIT {
            return Err(Error::Cutoff {
                cutoff: self.cutoff,
                population,
                threshold: EDGE_POPULATION_LIMIT,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    General,
    Hermitian,
    Unitary,
    Density,
}

/// Dense operator with a role tag whose invariants are checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    mat: CMat,
    tag: OperatorTag,
}

impl FockOperator {
    pub fn new(mat: CMat, tag: OperatorTag) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Invariant(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let op = FockOperator { mat, tag };
        op.validate()?;
        Ok(op)
    }

    /// Wraps a matrix without checks; the tag is `General`.
    pub fn general(mat: CMat) -> Self {
        FockOperator {
            mat,
            tag: OperatorTag::General,
        }
    }

    /// Wraps a matrix that is Hermitian by construction, symmetrising away
    /// rounding noise first.
    pub fn hermitian(mut mat: CMat) -> Self {
        hermitize(&mut mat);
        FockOperator {
            mat,
            tag: OperatorTag::Hermitian,
        }
    }

    /// Wraps a density matrix, symmetrising and checking the density invariants.
    pub fn density(mut mat: CMat) -> Result<Self> {
        hermitize(&mut mat);
        Self::new(mat, OperatorTag::Density)
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn tag(&self) -> OperatorTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dagger(&self) -> FockOperator {
        let tag = match self.tag {
            OperatorTag::Density => OperatorTag::Hermitian,
            t => t,
        };
        FockOperator {
            mat: self.mat.adjoint(),
            tag,
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// `Tr{self · rho}`.
    pub fn expect(&self, rho: &CMat) -> C64 {
        expect(&self.mat, rho)
    }

    /// Checks the invariants of the tag.
    pub fn validate(&self) -> Result<()> {
        match self.tag {
            OperatorTag::General => Ok(()),
            OperatorTag::Hermitian => check_hermitian(&self.mat),
            OperatorTag::Unitary => check_unitary(&self.mat),
            OperatorTag::Density => check_density(&self.mat),
        }
    }
}

pub fn check_hermitian(m: &CMat) -> Result<()> {
    let dev = max_abs_diff(m, &m.adjoint());
    if dev > HERMITIAN_TOL {
        return Err(Error::Invariant(format!(
            "not Hermitian: max |M - M†| = {dev:.3e}"
        )));
    }
    Ok(())
}

pub fn check_unitary(m: &CMat) -> Result<()> {
    let n = m.nrows();
    let dev = max_abs_diff(&(m.adjoint() * m), &CMat::identity(n, n));
    if dev > UNITARY_TOL {
        return Err(Error::Invariant(format!(
            "not unitary: max |U†U - 1| = {dev:.3e}"
        )));
    }
    Ok(())
}

pub fn check_density(m: &CMat) -> Result<()> {
    check_hermitian(m)?;
    let tr = m.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::Invariant(format!(
            "trace {:.12} deviates from 1",
            tr.re
        )));
    }
    let min = min_eigenvalue(m);
    if min < -POSITIVITY_TOL {
        return Err(Error::Invariant(format!(
            "negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let mut h = m.clone();
    hermitize(&mut h);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Max-norm distance between two matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Replaces `m` by `(m + m†)/2`.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// `Tr{a · b}` without forming the product.
pub fn expect(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Tr{ρ²}`.
pub fn purity(rho: &CMat) -> f64 {
    rho.iter().map(|x| x.norm_sqr()).sum()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// The standard oscillator operators on a truncated space.
#[derive(Debug, Clone)]
pub struct LadderOps {
    pub a: FockOperator,
    pub a_dag: FockOperator,
    pub z: FockOperator,
    pub p: FockOperator,
    pub n: FockOperator,
}

/// Builds `â`, `â†`, `ẑ`, `p̂` and `n̂ = â†â` truncated at `N − 1`.
pub fn ladder_ops(space: &FockSpace) -> LadderOps {
    let dim = space.dim();
    let mut a = CMat::zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let a_dag = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = (&a + &a_dag) * C64::new(s, 0.0);
    let p = (&a_dag - &a) * C64::new(0.0, s);
    let n = &a_dag * &a;
    LadderOps {
        a: FockOperator::general(a),
        a_dag: FockOperator::general(a_dag),
        z: FockOperator::hermitian(z),
        p: FockOperator::hermitian(p),
        n: FockOperator::hermitian(n),
    }
}

/// `|k⟩⟨k|` on a space of dimension `dim`.
pub fn fock_density(dim: usize, k: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(k, k)] = C64::new(1.0, 0.0);
    m
}

/// Normalised coherent state `|α⟩` truncated to `dim` levels.
pub fn coherent_ket(dim: usize, alpha: C64) -> DVector<C64> {
    let mut v = DVector::<C64>::zeros(dim);
    let mut amp = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    v[0] = amp;
    for k in 1..dim {
        amp = amp * alpha / (k as f64).sqrt();
        v[k] = amp;
    }
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

pub fn coherent_density(dim: usize, alpha: C64) -> CMat {
    let v = coherent_ket(dim, alpha);
    &v * v.adjoint()
}

/// Thermal state with mean occupation `nbar`, renormalised after truncation.
pub fn thermal_density(dim: usize, nbar: f64) -> CMat {
    let r = nbar / (1.0 + nbar);
    let mut m = CMat::zeros(dim, dim);
    let mut w = 1.0;
    let mut total = 0.0;
    for k in 0..dim {
        m[(k, k)] = C64::new(w, 0.0);
        total += w;
        w *= r;
    }
    m / C64::new(total, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    #[test]
    fn ladder_matrix_element() {
        let ops = ladder_ops(&FockSpace::new(2).unwrap());
        assert!((ops.a.matrix()[(0, 1)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn canonical_commutator_away_from_edge() {
        let space = FockSpace::new(16).unwrap();
        let ops = ladder_ops(&space);
        let (z, p) = (ops.z.matrix(), ops.p.matrix());
        let comm = z * p - p * z;
        for r in 0..15 {
            for c in 0..15 {
                let want = if r == c { i() } else { C64::new(0.0, 0.0) };
                assert!((comm[(r, c)] - want).norm() <= 1e-12, "({r},{c})");
            }
        }
        // the truncation shows up in the last diagonal entry
        assert!((comm[(15, 15)] - i()).norm() > 1.0);
    }

    #[test]
    fn ground_state_momentum_variance() {
        let space = FockSpace::new(16).unwrap();
        let ops = ladder_ops(&space);
        let p2 = ops.p.matrix() * ops.p.matrix();
        let v = expect(&p2, &fock_density(16, 0));
        assert!((v.re - 0.5).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn fock_space_validation() {
        assert!(FockSpace::new(1).is_err());
        assert!(FockSpace::with_edge_band(10, 0).is_err());
        assert!(FockSpace::with_edge_band(10, 10).is_err());
        assert_eq!(FockSpace::new(16).unwrap().edge_band(), 2);
        assert_eq!(FockSpace::new(40).unwrap().edge_band(), 4);
    }

    #[test]
    fn z_spectrum_diagonalises_position() {
        let space = FockSpace::new(12).unwrap();
        let ops = ladder_ops(&space);
        let spec = space.z_spectrum();
        let d = spec.vectors_c.transpose() * ops.z.matrix() * &spec.vectors_c;
        for r in 0..12 {
            for c in 0..12 {
                let want = if r == c { spec.values[r] } else { 0.0 };
                assert!((d[(r, c)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn density_tag_rejects_bad_states() {
        let mut m = fock_density(4, 0);
        m[(1, 1)] = C64::new(-0.1, 0.0);
        m[(0, 0)] = C64::new(1.1, 0.0);
        assert!(FockOperator::density(m).is_err());
        let m = fock_density(4, 0) * C64::new(2.0, 0.0);
        assert!(FockOperator::density(m).is_err());
        assert!(FockOperator::density(coherent_density(20, C64::new(0.7, 0.3))).is_ok());
    }

    #[test]
    fn guard_trips_on_edge_population() {
        let space = FockSpace::new(10).unwrap();
        assert!(space.guard(&fock_density(10, 3)).is_ok());
        assert!(matches!(
            space.guard(&fock_density(10, 9)),
            Err(Error::Cutoff { .. })
        ));
        assert!(space.guard(&thermal_density(10, 2.0)).is_err());
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = CMat::from_fn(2, 2, |r, c| C64::new((r * 2 + c) as f64, 0.0));
        let b = CMat::identity(3, 3);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        assert_eq!(k[(3, 0)], C64::new(2.0, 0.0));
        assert_eq!(k[(4, 1)], C64::new(2.0, 0.0));
        assert_eq!(k[(4, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn thermal_and_coherent_occupations() {
        let ops = ladder_ops(&FockSpace::new(60).unwrap());
        let n = expect(ops.n.matrix(), &thermal_density(60, 1.5)).re;
        assert!((n - 1.5).abs() < 1e-9);
        let n = expect(ops.n.matrix(), &coherent_density(60, C64::new(1.2, -0.5))).re;
        assert!((n - 1.69).abs() < 1e-12);
    }
}
