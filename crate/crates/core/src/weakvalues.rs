//! Weak characteristic function and the normal and canonical weak values.
//!
//! Everything is evaluated in the eigenbasis of `Â` through the selection
//! kernel `g(a, a') = ⟨a'|ρ_f|a⟩⟨a|ρ_i|a'⟩`, so that
//! `Z^w(μ, ν) = Σ g(a, a') e^{iμa - iνa'}` and
//! `α_{j,k}(z, s) = Σ g(a, a') a'^j a^k e^{i(z+s)a + i(z-s)a'}`.

use num_complex::Complex64;

use crate::hilbert::{DensityMatrix, SystemObservable};
use crate::{CMatrix, Error, Result};

/// Overlap `|Tr ρ_f ρ_i|` below which canonical weak values are refused.
pub const EPS_ORTH: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Pre/post-selection data projected onto the eigenbasis of `Â`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionKernel {
    a: Vec<f64>,
    g: CMatrix,
    // Whether ρ_i or ρ_f lies inside a single eigenspace of Â.
    degenerate: bool,
}

fn in_single_eigenspace(rho: &CMatrix, obs: &SystemObservable) -> bool {
    let a = obs.matrix();
    let mean = (a * rho).trace().re;
    let scale = obs.max_abs_eigenvalue().max(1.0);
    (a * rho - rho * Complex64::new(mean, 0.0)).norm() < 1e-10 * scale
}

fn hermitian_part(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

impl SelectionKernel {
    pub fn new(rho_i: &DensityMatrix, rho_f: &DensityMatrix, obs: &SystemObservable) -> Result<Self> {
        let d = obs.dim();
        for rho in [rho_i, rho_f] {
            if rho.dim() != d {
                return Err(Error::DimMismatch { expected: d, got: rho.dim() });
            }
        }
        let ri = hermitian_part(obs.to_eigenbasis(rho_i.matrix()));
        let rf = hermitian_part(obs.to_eigenbasis(rho_f.matrix()));
        let g = CMatrix::from_fn(d, d, |a, ap| rf[(ap, a)] * ri[(a, ap)]);
        let degenerate =
            in_single_eigenspace(rho_i.matrix(), obs) || in_single_eigenspace(rho_f.matrix(), obs);
        Ok(Self { a: obs.eigenvalues().to_vec(), g, degenerate })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.a
    }

    /// `g(a, a')` indexed by eigenvalue positions.
    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// True when ρ_i or ρ_f is supported in a single eigenspace of `Â`.
    pub fn is_degenerate_selection(&self) -> bool {
        self.degenerate
    }

    /// `Σ g(a, a') w(a, a')`.
    pub fn contract(&self, w: impl Fn(f64, f64) -> Complex64) -> Complex64 {
        let d = self.a.len();
        let mut s = C0;
        for i in 0..d {
            for k in 0..d {
                let g = self.g[(i, k)];
                if g != C0 {
                    s += g * w(self.a[i], self.a[k]);
                }
            }
        }
        s
    }

    /// `Z^w(μ, ν) = Tr{ρ_f e^{iμÂ} ρ_i e^{-iνÂ}}`.
    pub fn weak_charfunc(&self, mu: f64, nu: f64) -> Complex64 {
        self.contract(|a, ap| Complex64::from_polar(1.0, mu * a - nu * ap))
    }

    /// `α_{j,k}(z, s) = Tr{Â^j ρ_f Â^k e^{i(z+s)Â} ρ_i e^{i(z-s)Â}}` with `s = λq*`.
    pub fn alpha(&self, j: u32, k: u32, z: f64, s: f64) -> Complex64 {
        self.contract(|a, ap| {
            Complex64::from_polar(ap.powi(j as i32) * a.powi(k as i32), (z + s) * a + (z - s) * ap)
        })
    }

    /// Copy with `Â → Â/c`.
    pub fn rescaled(&self, c: f64) -> Self {
        Self { a: self.a.iter().map(|x| x / c).collect(), ..self.clone() }
    }
}

/// `Z^w(μ, ν)` for explicit states and observable.
pub fn weak_charfunc(
    rho_i: &DensityMatrix,
    rho_f: &DensityMatrix,
    obs: &SystemObservable,
    mu: f64,
    nu: f64,
) -> Result<Complex64> {
    Ok(SelectionKernel::new(rho_i, rho_f, obs)?.weak_charfunc(mu, nu))
}

/// Normal weak value `α_{j,k}(z)` at shift `λq*`.
pub fn normal_weak_value(
    rho_i: &DensityMatrix,
    rho_f: &DensityMatrix,
    obs: &SystemObservable,
    j: u32,
    k: u32,
    z: f64,
    lambda_qstar: f64,
) -> Result<Complex64> {
    Ok(SelectionKernel::new(rho_i, rho_f, obs)?.alpha(j, k, z, lambda_qstar))
}

/// Table of `α_{j,k}(z)` at a fixed shift for `0 ≤ j, k ≤ J`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakValueTable {
    pub max_order: u32,
    pub alpha: CMatrix,
    pub z: f64,
    pub lambda_qstar: f64,
}

impl WeakValueTable {
    pub fn new(kernel: &SelectionKernel, max_order: u32, z: f64, lambda_qstar: f64) -> Self {
        let n = max_order as usize + 1;
        let alpha = CMatrix::from_fn(n, n, |j, k| kernel.alpha(j as u32, k as u32, z, lambda_qstar));
        Self { max_order, alpha, z, lambda_qstar }
    }

    pub fn get(&self, j: u32, k: u32) -> Complex64 {
        self.alpha[(j as usize, k as usize)]
    }

    /// `α₀`.
    pub fn alpha0(&self) -> Complex64 {
        self.get(0, 0)
    }

    /// `α₁ = α_{1,0}`.
    pub fn alpha1(&self) -> Complex64 {
        self.get(1, 0)
    }

    /// `α_{1,1}`.
    pub fn alpha11(&self) -> Complex64 {
        self.get(1, 1)
    }

    /// `α₂ = α_{2,0}`.
    pub fn alpha2(&self) -> Complex64 {
        self.get(2, 0)
    }
}

/// `A^w = α₁/α₀`, `B^w = α_{1,1}/α₀`, `C^w = α₂/α₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalWeakValues {
    pub a_w: Complex64,
    pub b_w: f64,
    pub c_w: Complex64,
    pub alpha0: f64,
}

impl CanonicalWeakValues {
    pub fn from_kernel(kernel: &SelectionKernel, z: f64, lambda_qstar: f64) -> Result<Self> {
        let a0 = kernel.alpha(0, 0, z, lambda_qstar);
        if a0.norm() < EPS_ORTH {
            if kernel.is_degenerate_selection() {
                return Err(Error::DegenerateSelection);
            }
            return Err(Error::OrthogonalStates(a0.norm()));
        }
        Ok(Self {
            a_w: kernel.alpha(1, 0, z, lambda_qstar) / a0,
            b_w: (kernel.alpha(1, 1, z, lambda_qstar) / a0).re,
            c_w: kernel.alpha(2, 0, z, lambda_qstar) / a0,
            alpha0: a0.re,
        })
    }
}

pub fn canonical_values(
    rho_i: &DensityMatrix,
    rho_f: &DensityMatrix,
    obs: &SystemObservable,
    z: f64,
    lambda_qstar: f64,
) -> Result<CanonicalWeakValues> {
    CanonicalWeakValues::from_kernel(&SelectionKernel::new(rho_i, rho_f, obs)?, z, lambda_qstar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli, random_density, random_hermitian, random_state, spectral_decompose};
    use crate::CVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spin(theta: f64) -> (DensityMatrix, DensityMatrix, SystemObservable) {
        (
            DensityMatrix::from_bloch([0.0, 0.0, 1.0]).unwrap(),
            DensityMatrix::from_bloch([theta.sin(), 0.0, theta.cos()]).unwrap(),
            spectral_decompose(&pauli()[0]).unwrap(),
        )
    }

    #[test]
    fn eigenstate_phase() {
        let up = DensityMatrix::from_bloch([0.0, 0.0, 1.0]).unwrap();
        let sz = spectral_decompose(&pauli()[2]).unwrap();
        for (mu, nu) in [(0.3, -1.1), (2.0, 0.5)] {
            let z = weak_charfunc(&up, &up, &sz, mu, nu).unwrap();
            assert!((z - Complex64::from_polar(1.0, mu - nu)).norm() < 1e-14);
        }
    }

    #[test]
    fn spin_values_at_right_angle() {
        let (ri, rf, a) = spin(FRAC_PI_2);
        assert!((weak_charfunc(&ri, &rf, &a, 0.0, 0.0).unwrap().re - 0.5).abs() < 1e-14);
        let a1 = normal_weak_value(&ri, &rf, &a, 1, 0, 0.0, 0.0).unwrap();
        assert!((a1 - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        let cv = canonical_values(&ri, &rf, &a, 0.0, 0.0).unwrap();
        assert!((cv.a_w - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn spin_alpha11_at_pi() {
        let (ri, rf, a) = spin(PI);
        let v = normal_weak_value(&ri, &rf, &a, 1, 1, 0.0, 0.0).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(matches!(canonical_values(&ri, &rf, &a, 0.0, 0.0), Err(Error::OrthogonalStates(_))));
    }

    #[test]
    fn eigenvalue_reproduction() {
        let up = DensityMatrix::from_bloch([0.0, 0.0, 1.0]).unwrap();
        let h = pauli()[2].clone() * Complex64::new(2.5, 0.0);
        let a = spectral_decompose(&h).unwrap();
        let cv = canonical_values(&up, &up, &a, 0.0, 0.0).unwrap();
        assert!((cv.a_w.re - 2.5).abs() < 1e-14 && cv.a_w.im.abs() < 1e-14);
        assert!((cv.b_w - 6.25).abs() < 1e-13);
        assert!((cv.c_w.re - 6.25).abs() < 1e-13);
    }

    #[test]
    fn degenerate_selection_is_reported() {
        let up = DensityMatrix::from_bloch([0.0, 0.0, 1.0]).unwrap();
        let down = DensityMatrix::from_bloch([0.0, 0.0, -1.0]).unwrap();
        let sz = spectral_decompose(&pauli()[2]).unwrap();
        assert_eq!(canonical_values(&up, &down, &sz, 0.0, 0.0), Err(Error::DegenerateSelection));
    }

    #[test]
    fn nopps_limit() {
        // α₀ and α₁ vanish as θ → π while α_{1,1} stays finite.
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let (ri, rf, a) = spin(PI - eps);
            let k = SelectionKernel::new(&ri, &rf, &a).unwrap();
            let a0 = k.alpha(0, 0, 0.0, 0.0).norm();
            let a1 = k.alpha(1, 0, 0.0, 0.0).norm();
            assert!(a0 < prev && a1 < 2.0 * eps);
            assert!((k.alpha(1, 1, 0.0, 0.0).re - 1.0).abs() < eps);
            prev = a0;
        }
    }

    #[test]
    fn idempotent_exception() {
        // Â a projector, states inside its range: α₀/α_{0,1} = 1 at every angle.
        let c = |x: f64| Complex64::new(x, 0.0);
        let p = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(1.0), c(0.0)]));
        let a = spectral_decompose(&p).unwrap();
        let ri = DensityMatrix::pure(&CVector::from_vec(vec![c(1.0), c(0.0), c(0.0)])).unwrap();
        for eps in [1e-1, 1e-3, 1e-5] {
            let th = PI - eps;
            let psi = CVector::from_vec(vec![c((th / 2.0).cos()), c((th / 2.0).sin()), c(0.0)]);
            let rf = DensityMatrix::pure(&psi).unwrap();
            let k = SelectionKernel::new(&ri, &rf, &a).unwrap();
            let r = k.alpha(0, 0, 0.0, 0.0) / k.alpha(0, 1, 0.0, 0.0);
            assert!((r - c(1.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn table_layout() {
        let (ri, rf, a) = spin(1.0);
        let k = SelectionKernel::new(&ri, &rf, &a).unwrap();
        let t = WeakValueTable::new(&k, 3, 0.0, 0.0);
        assert_eq!(t.get(2, 1), k.alpha(2, 1, 0.0, 0.0));
        assert_eq!(t.alpha2(), k.alpha(2, 0, 0.0, 0.0));
    }

    fn random_setup(seed: u64, d: usize, rank_i: usize, rank_f: usize) -> SelectionKernel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = spectral_decompose(&random_hermitian(&mut rng, d)).unwrap();
        let ri = random_density(&mut rng, d, rank_i);
        let rf = random_density(&mut rng, d, rank_f);
        SelectionKernel::new(&ri, &rf, &a).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hermitian_symmetry(seed in any::<u64>(), d in 2usize..6, j in 0u32..4, k in 0u32..4) {
            let sk = random_setup(seed, d, d, d);
            let a = sk.alpha(j, k, 0.0, 0.0);
            let b = sk.alpha(k, j, 0.0, 0.0);
            let scale = 1.0 + a.norm();
            prop_assert!((a - b.conj()).norm() < 1e-12 * scale);
            if j == k {
                prop_assert!(a.im.abs() < 1e-12 * scale);
            }
        }

        #[test]
        fn charfunc_conjugation(seed in any::<u64>(), d in 2usize..6, mu in -3.0f64..3.0, nu in -3.0f64..3.0) {
            let sk = random_setup(seed, d, 1, 2);
            let a = sk.weak_charfunc(mu, nu);
            let b = sk.weak_charfunc(nu, mu).conj();
            prop_assert!((a - b).norm() < 1e-12);
            prop_assert!(sk.weak_charfunc(mu, mu).im.abs() < 1e-12);
        }

        #[test]
        fn derivative_consistency(seed in any::<u64>(), s in -1.0f64..1.0) {
            // α_{j,k}(0, s) = (-i∂_μ)^k (i∂_ν)^j Z^w at μ = ν = s.
            let sk = random_setup(seed, 3, 2, 1);
            let h = 1e-4;
            let z = |m: f64, n: f64| sk.weak_charfunc(m, n);
            let i = Complex64::new(0.0, 1.0);
            let d_mu = (z(s + h, s) - z(s - h, s)) / (2.0 * h) * (-i);
            let d_nu = (z(s, s + h) - z(s, s - h)) / (2.0 * h) * i;
            let d_mn = (z(s + h, s + h) - z(s + h, s - h) - z(s - h, s + h) + z(s - h, s - h))
                / (4.0 * h * h);
            let cases = [(d_mu, sk.alpha(0, 1, 0.0, s)), (d_nu, sk.alpha(1, 0, 0.0, s)), (d_mn, sk.alpha(1, 1, 0.0, s))];
            let scale = sk.max_abs_eigenvalue().powi(2);
            for (fd, exact) in cases {
                prop_assert!((fd - exact).norm() <= 1e-6 * scale.max(exact.norm()));
            }
        }

        #[test]
        fn pure_states_saturate_b(seed in any::<u64>(), d in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = spectral_decompose(&random_hermitian(&mut rng, d)).unwrap();
            let ri = DensityMatrix::pure(&random_state(&mut rng, d)).unwrap();
            let rf = DensityMatrix::pure(&random_state(&mut rng, d)).unwrap();
            if let Ok(cv) = canonical_values(&ri, &rf, &a, 0.0, 0.0) {
                let b = cv.a_w.norm_sqr();
                prop_assert!((cv.b_w - b).abs() <= 1e-10 * b.max(1.0));
            }
        }
    }
}
