//! Dense complex linear algebra on small system Hilbert spaces (dim ≤ 64):
//! density matrices, Hermitian observables with cached spectra, trace products.

use std::cmp::Ordering;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector, Error, Result};

/// Hermiticity tolerance (absolute, per element).
pub const EPS_HERM: f64 = 1e-10;
/// Unit-trace tolerance.
pub const EPS_TR: f64 = 1e-10;
/// Smallest eigenvalue accepted as non-negative.
pub const EPS_PSD: f64 = 1e-10;
/// Largest system dimension handled by this module.
pub const MAX_DIM: usize = 64;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("zero or non-finite state vector".into()));
        }
        let v = psi / Complex64::new(norm, 0.0);
        validate_density(&(&v * v.adjoint()))
    }

    /// Qubit state `(1 + n·σ)/2` for a polarization vector with `|n| ≤ 1`.
    pub fn from_bloch(n: [f64; 3]) -> Result<Self> {
        let r2 = n.iter().map(|x| x * x).sum::<f64>();
        if !r2.is_finite() || r2 > 1.0 + 1e-12 {
            return Err(Error::NotPositive(0.5 * (1.0 - r2.sqrt())));
        }
        validate_density(&bloch_operator(0.5, [0.5 * n[0], 0.5 * n[1], 0.5 * n[2]]))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::DimensionTooLarge(dim));
        }
        validate_density(&(CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0)))
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }

    /// Real expectation value Tr(ρH) of a Hermitian operator.
    pub fn expectation(&self, h: &CMatrix) -> Result<f64> {
        Ok(trace_product(&[&self.m, h])?.re)
    }
}

/// Builds `c0·1 + c·σ` on a qubit.
pub fn bloch_operator(c0: f64, c: [f64; 3]) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c0 + c[2], 0.0),
            Complex64::new(c[0], -c[1]),
            Complex64::new(c[0], c[1]),
            Complex64::new(c0 - c[2], 0.0),
        ],
    )
}

/// Pauli matrices σ_x, σ_y, σ_z.
pub fn pauli() -> [CMatrix; 3] {
    [
        bloch_operator(0.0, [1.0, 0.0, 0.0]),
        bloch_operator(0.0, [0.0, 1.0, 0.0]),
        bloch_operator(0.0, [0.0, 0.0, 1.0]),
    ]
}

/// Hermitian observable with its spectral decomposition.
///
/// Eigenvalues are sorted ascending. Each eigenvector has its first non-zero
/// component made real and positive; within a degenerate cluster vectors are
/// ordered lexicographically so the output is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemObservable {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl SystemObservable {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `V diag(f(a)) V†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &a) in self.eigenvalues.iter().enumerate() {
            let fa = f(a);
            for x in scaled.column_mut(k).iter_mut() {
                *x *= fa;
            }
        }
        scaled * v.adjoint()
    }

    /// `e^{i z Â}`, exact through the spectral decomposition.
    pub fn exp_i(&self, z: f64) -> CMatrix {
        self.apply_fn(|a| Complex64::from_polar(1.0, z * a))
    }

    /// `Â^k` (k = 0 gives the identity).
    pub fn power(&self, k: u32) -> CMatrix {
        if k == 0 {
            let d = self.dim();
            return CMatrix::identity(d, d);
        }
        self.apply_fn(|a| Complex64::new(a.powi(k as i32), 0.0))
    }

    /// `V† M V`: matrix elements in the eigenbasis.
    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * m * &self.eigenvectors
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|a| Complex64::new(a, 0.0))
    }
}

/// Largest element-wise deviation from Hermiticity.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_square(m: &CMatrix) -> Result<usize> {
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    if r == 0 || r > MAX_DIM {
        return Err(Error::DimensionTooLarge(r));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix element".into()));
    }
    Ok(r)
}

/// Symmetrized copy `(M + M†)/2`; removes round-off asymmetry before an
/// eigen-solver that assumes exact Hermiticity.
fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn phase_fix(v: &mut CVector) {
    let scale = v.iter().fold(0.0f64, |s, z| s.max(z.norm()));
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12 * scale.max(1e-300)).copied() {
        let phase = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

fn lex_cmp(a: &CVector, b: &CVector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Spectral decomposition of a Hermitian matrix.
pub fn spectral_decompose(h: &CMatrix) -> Result<SystemObservable> {
    let n = check_square(h)?;
    let defect = hermitian_defect(h);
    if defect > EPS_HERM {
        return Err(Error::NonHermitian(defect));
    }
    let herm = hermitian_part(h);
    let eig = SymmetricEigen::new(herm.clone());
    let mut pairs: Vec<(f64, CVector)> = (0..n)
        .map(|k| {
            let mut v: CVector = eig.eigenvectors.column(k).into_owned();
            let nv = v.norm();
            v /= Complex64::new(nv, 0.0);
            phase_fix(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Cluster near-equal eigenvalues, then order each cluster's vectors.
    let scale = pairs.iter().fold(1.0f64, |m, p| m.max(p.0.abs()));
    let tie = 1e-12 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end].0 - pairs[end - 1].0 <= tie {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lex_cmp(&a.1, &b.1));
        start = end;
    }

    let mut vecs = CMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, (a, v)) in pairs.into_iter().enumerate() {
        vals.push(a);
        vecs.set_column(k, &v);
    }
    Ok(SystemObservable { matrix: herm, eigenvalues: vals, eigenvectors: vecs })
}

/// `Tr(m₁ m₂ … m_n)`.
pub fn trace_product(ms: &[&CMatrix]) -> Result<Complex64> {
    let Some(first) = ms.first() else {
        return Err(Error::InvalidParameter("empty product".into()));
    };
    let (r, c) = first.shape();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    for m in ms {
        if m.shape() != (r, r) {
            return Err(Error::DimMismatch { expected: r, got: m.nrows().max(m.ncols()) });
        }
    }
    if ms.len() == 1 {
        return Ok(first.trace());
    }
    // Multiply all but the last factor, then contract the trace with it.
    let mut acc = (*first).clone();
    for m in &ms[1..ms.len() - 1] {
        acc = &acc * *m;
    }
    let last = ms[ms.len() - 1];
    let mut tr = C0;
    for i in 0..r {
        for k in 0..r {
            tr += acc[(i, k)] * last[(k, i)];
        }
    }
    Ok(tr)
}

/// Validates a candidate density matrix without renormalizing it.
pub fn validate_density(m: &CMatrix) -> Result<DensityMatrix> {
    check_square(m)?;
    let defect = hermitian_defect(m);
    if defect > EPS_HERM {
        return Err(Error::NonHermitian(defect));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > EPS_TR || tr.im.abs() > EPS_TR {
        return Err(Error::NonUnitTrace(tr.re));
    }
    let herm = hermitian_part(m);
    let min_eig = SymmetricEigen::new(herm.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < -EPS_PSD {
        return Err(Error::NotPositive(min_eig));
    }
    Ok(DensityMatrix { m: herm })
}

/// Projector onto the span of the eigenvectors with eigenvalue `a`.
pub fn eigenprojector(obs: &SystemObservable, a: f64, tol: f64) -> CMatrix {
    let d = obs.dim();
    let mut p = CMatrix::zeros(d, d);
    for (k, &ak) in obs.eigenvalues().iter().enumerate() {
        if (ak - a).abs() <= tol {
            let v = obs.eigenvectors().column(k);
            p += v * v.adjoint();
        }
    }
    p
}

/// Haar-random pure state of dimension `d`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVector {
    let v = CVector::from_fn(d, |_, _| Complex64::new(standard_normal(rng), standard_normal(rng)));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Random density matrix of the given rank (Hilbert–Schmidt-like measure).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(d, rank.max(1), |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= Complex64::new(tr, 0.0);
    validate_density(&m).expect("Gram matrix is a density matrix")
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| Complex64::new(standard_normal(rng), standard_normal(rng)));
    hermitian_part(&g)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
