//! Closed-form results for measuring a qubit component `n·σ`.

use num_complex::Complex64;

use crate::exact::{ConditionalDistribution, MeasurementSetup};
use crate::hilbert::{bloch_operator, spectral_decompose, DensityMatrix};
use crate::probe::{GaussianProbe, ProbeState};
use crate::util::{binom, ln_binom, log_sum_exp};
use crate::{CMatrix, Error, Result};

/// Largest moment order evaluated by the log-space sums.
pub const MAX_MOMENT_ORDER: u32 = 1000;

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Polarizations of `ρ_i`, `ρ_f`, the measured axis, coupling and Gaussian probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSetup {
    n_i: Vec3,
    n_f: Vec3,
    n: Vec3,
    lambda: f64,
    probe: GaussianProbe,
}

impl SpinSetup {
    pub fn new(n_i: Vec3, n_f: Vec3, n: Vec3, lambda: f64, probe: GaussianProbe) -> Result<Self> {
        for (name, v) in [("n_i", n_i), ("n_f", n_f)] {
            let r = dot(v, v).sqrt();
            if !r.is_finite() || r > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!("|{name}| = {r} > 1")));
            }
        }
        let r = dot(n, n).sqrt();
        if !((r - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidParameter(format!("|n| = {r} is not 1")));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("λ = {lambda} is not finite")));
        }
        Ok(Self { n_i, n_f, n, lambda, probe })
    }

    /// Coplanar sweep geometry: `n_i = ẑ`, `n = x̂`, `n_f` at angle `θ` from `n_i`.
    pub fn coplanar(theta: f64, lambda: f64, probe: GaussianProbe) -> Self {
        Self {
            n_i: [0.0, 0.0, 1.0],
            n_f: [theta.sin(), 0.0, theta.cos()],
            n: [1.0, 0.0, 0.0],
            lambda,
            probe,
        }
    }

    pub fn n_i(&self) -> Vec3 {
        self.n_i
    }

    pub fn n_f(&self) -> Vec3 {
        self.n_f
    }

    pub fn n(&self) -> Vec3 {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn probe(&self) -> &GaussianProbe {
        &self.probe
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    pub fn with_probe(&self, probe: GaussianProbe) -> Self {
        Self { probe, ..*self }
    }

    /// Applies the same rotation `r` (row-major 3×3) to all three vectors.
    pub fn rotated(&self, r: [[f64; 3]; 3]) -> Self {
        let rot = |v: Vec3| [dot(r[0], v), dot(r[1], v), dot(r[2], v)];
        Self { n_i: rot(self.n_i), n_f: rot(self.n_f), n: rot(self.n), ..*self }
    }

    /// `Δ = ΔP/λ`.
    pub fn big_delta(&self) -> f64 {
        self.probe.delta_p() / self.lambda
    }

    /// `δ = δp/λ`.
    pub fn small_delta(&self) -> f64 {
        self.probe.coherence_scale() / self.lambda
    }

    pub fn observable_matrix(&self) -> CMatrix {
        bloch_operator(0.0, self.n)
    }

    /// Equivalent general setup with the given probe.
    pub fn to_measurement(&self, probe: impl Into<ProbeState>) -> Result<MeasurementSetup> {
        MeasurementSetup::new(
            self.lambda,
            DensityMatrix::from_bloch(self.n_i)?,
            DensityMatrix::from_bloch(self.n_f)?,
            spectral_decompose(&self.observable_matrix())?,
            probe,
        )
    }

    pub fn to_measurement_setup(&self) -> Result<MeasurementSetup> {
        self.to_measurement(self.probe)
    }
}

/// `(α₀, α₁ = α_{1,0}, α_{1,1})` of the qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinWeakValues {
    pub alpha0: f64,
    pub alpha1: Complex64,
    pub alpha11: f64,
}

pub fn spin_weak_values(s: &SpinSetup) -> SpinWeakValues {
    let (ni, nf, n) = (s.n_i, s.n_f, s.n);
    let sum = [ni[0] + nf[0], ni[1] + nf[1], ni[2] + nf[2]];
    SpinWeakValues {
        alpha0: 0.5 * (1.0 + dot(ni, nf)),
        alpha1: Complex64::new(0.5 * dot(n, sum), 0.5 * dot(n, cross(nf, ni))),
        alpha11: 0.5 * (1.0 - dot(ni, nf) + 2.0 * dot(n, ni) * dot(n, nf)),
    }
}

/// `(overline{cos 2λq}, overline{sin 2λq})`.
fn cos_sin_average(probe: &ProbeState, lambda: f64) -> (f64, f64) {
    match probe {
        ProbeState::Gaussian(g) => {
            let damp = (-2.0 * lambda * lambda * g.delta_q() * g.delta_q()).exp();
            let ph = 2.0 * lambda * g.q_bar();
            (ph.cos() * damp, ph.sin() * damp)
        }
        ProbeState::Grid(gp) => {
            let z = gp.q_average(|q| Complex64::from_polar(1.0, 2.0 * lambda * q));
            (z.re, z.im)
        }
    }
}

/// Post-selection normalization `N` for any probe.
pub fn spin_normalization(s: &SpinSetup, probe: &ProbeState) -> f64 {
    let w = spin_weak_values(s);
    let (c, sn) = cos_sin_average(probe, s.lambda);
    0.5 * (1.0 + c) * w.alpha0 + sn * w.alpha1.im + 0.5 * (1.0 - c) * w.alpha11
}

/// `P(p|f)` on the momentum grid the exact engine would use for this probe.
pub fn spin_pdf(s: &SpinSetup, probe: &ProbeState) -> Result<ConditionalDistribution> {
    let lam = s.lambda;
    let w = spin_weak_values(s);
    let n_norm = spin_normalization(s, probe);
    if !(n_norm > 1e-300) {
        return Err(Error::ZeroPostselection(n_norm));
    }
    let plus = w.alpha0 + w.alpha11;
    let r1 = w.alpha1.re;
    match probe {
        ProbeState::Gaussian(g) => {
            let grid = g.auto_grid(lam.abs())?;
            let (c, sn) = cos_sin_average(probe, lam);
            let cross_term = c * (w.alpha0 - w.alpha11) + 2.0 * sn * w.alpha1.im;
            let support = grid.ps();
            let pdf = support
                .iter()
                .map(|&p| {
                    let shifted: f64 = [1.0, -1.0]
                        .iter()
                        .map(|&sg| (plus + 2.0 * sg * r1) * g.p_density(p - lam * sg))
                        .sum();
                    (shifted + 2.0 * cross_term * g.p_density(p)) / (4.0 * n_norm)
                })
                .collect();
            Ok(ConditionalDistribution {
                support,
                pdf,
                cell_width: Some(grid.dp()),
                normalization_n: n_norm,
            })
        }
        ProbeState::Grid(gp) => {
            let grid = *gp.grid();
            let qs = grid.qs();
            let dp = grid.dp();
            // diag of the momentum transform of e^{-iaq} K e^{ibq'} is ρ₀(p+a, p+b)·dp.
            let twisted = |a: f64, b: f64| -> Vec<Complex64> {
                let m = CMatrix::from_fn(grid.len(), grid.len(), |x, y| {
                    gp.kernel()[(x, y)] * Complex64::from_polar(1.0, -a * qs[x] + b * qs[y])
                });
                let mp = grid.to_momentum(&m);
                (0..grid.len()).map(|k| mp[(k, k)] / dp).collect()
            };
            let mut pdf = vec![0.0; grid.len()];
            for sg in [1.0, -1.0] {
                let diag = twisted(-lam * sg, -lam * sg);
                let off = twisted(lam * sg, -lam * sg);
                let coef = Complex64::new(w.alpha0 - w.alpha11, 2.0 * sg * w.alpha1.im);
                for k in 0..grid.len() {
                    pdf[k] += (plus + 2.0 * sg * r1) * diag[k].re + (coef * off[k]).re;
                }
            }
            for v in &mut pdf {
                *v /= 4.0 * n_norm;
            }
            Ok(ConditionalDistribution {
                support: grid.ps(),
                pdf,
                cell_width: Some(dp),
                normalization_n: n_norm,
            })
        }
    }
}

fn ln_gauss_moment(g: &GaussianProbe, m: u32) -> f64 {
    g.ln_p_moment(m).expect("even order")
}

fn check_order(j: u32) -> Result<()> {
    if j > MAX_MOMENT_ORDER {
        return Err(Error::InvalidParameter(format!("moment order {j} > {MAX_MOMENT_ORDER}")));
    }
    Ok(())
}

fn gaussian_n(s: &SpinSetup) -> Result<f64> {
    let n = spin_normalization(s, &ProbeState::Gaussian(s.probe));
    if !(n > 1e-300) {
        return Err(Error::ZeroPostselection(n));
    }
    Ok(n)
}

/// `ln Σ_{k≥1} C(j,2k) overline{p^{j-2k}} λ^{2k} - ln overline{p^j}` for even `j ≥ 2`.
fn ln_even_excess(s: &SpinSetup, j: u32) -> f64 {
    let g = &s.probe;
    let ll = s.lambda.abs().ln();
    let base = ln_gauss_moment(g, j);
    let terms: Vec<f64> = (1..=j / 2)
        .map(|k| ln_binom(j, 2 * k) + ln_gauss_moment(g, j - 2 * k) + f64::from(2 * k) * ll - base)
        .collect();
    log_sum_exp(&terms)
}

/// Exact `⟨p^j⟩_f` for the Gaussian probe. Very large orders overflow to infinity;
/// use [`spin_scaled_moment`] there.
pub fn spin_exact_moment(s: &SpinSetup, j: u32) -> Result<f64> {
    check_order(j)?;
    if j == 0 {
        return Ok(1.0);
    }
    let n = gaussian_n(s)?;
    let w = spin_weak_values(s);
    let g = &s.probe;
    if s.lambda == 0.0 {
        return Ok(if j.is_multiple_of(2) { g.p_moment(j) } else { 0.0 });
    }
    let ll = s.lambda.abs().ln();
    if j.is_multiple_of(2) {
        let base = ln_gauss_moment(g, j);
        let excess = (base + ln_even_excess(s, j)).exp();
        Ok(base.exp() + (w.alpha0 + w.alpha11) / (2.0 * n) * excess)
    } else {
        let terms: Vec<f64> = (0..=(j - 1) / 2)
            .map(|k| ln_binom(j, 2 * k) + ln_gauss_moment(g, 2 * k) + f64::from(j - 2 * k) * ll)
            .collect();
        Ok(s.lambda.signum() * log_sum_exp(&terms).exp() * w.alpha1.re / n)
    }
}

/// Exact `(⟨p^j⟩_f - overline{p^j}) / (j overline{p^j})` for even `j`, evaluated in log space.
pub fn spin_scaled_moment(s: &SpinSetup, j: u32) -> Result<f64> {
    check_order(j)?;
    if j == 0 || j % 2 == 1 {
        return Err(Error::InvalidParameter(format!("scaled moments need a positive even order, got {j}")));
    }
    let n = gaussian_n(s)?;
    let w = spin_weak_values(s);
    if s.lambda == 0.0 {
        return Ok(0.0);
    }
    Ok((w.alpha0 + w.alpha11) / (2.0 * n * f64::from(j)) * ln_even_excess(s, j).exp())
}

/// Second-order interpolation for `⟨p^j⟩_f`, valid for `j ≤ n* = (ΔP/λ)²`.
pub fn spin_interp_moment(s: &SpinSetup, j: u32) -> Result<f64> {
    let g = &s.probe;
    let lam = s.lambda;
    let n_star = if lam == 0.0 { f64::INFINITY } else { (g.delta_p() / lam).powi(2) };
    if f64::from(j) > n_star {
        return Err(Error::BeyondValidity { order: j, n_star });
    }
    if j == 0 {
        return Ok(1.0);
    }
    let w = spin_weak_values(s);
    // A² = 1 for a spin component, so α₂ = α₀.
    let q2 = g.q_moment(2);
    let n2 = w.alpha0 + 2.0 * lam * g.q_bar() * w.alpha1.im + lam * lam * q2 * (w.alpha11 - w.alpha0);
    if j.is_multiple_of(2) {
        Ok(g.p_moment(j) + lam * lam * binom(j, 2) * g.p_moment(j - 2) * (w.alpha0 + w.alpha11) / (2.0 * n2))
    } else {
        Ok(lam * f64::from(j) * g.p_moment(j - 1) * w.alpha1.re / n2)
    }
}

/// Lowest-order scaled even moment `(α₀ + α_{1,1}) / (4Δ²N)`, independent of `j`.
pub fn universal_scaling(s: &SpinSetup, j: u32) -> Result<f64> {
    if j == 0 || j % 2 == 1 {
        return Err(Error::InvalidParameter(format!("universal scaling needs a positive even order, got {j}")));
    }
    let w = spin_weak_values(s);
    let n = gaussian_n(s)?;
    let d = s.big_delta();
    Ok((w.alpha0 + w.alpha11) / (4.0 * d * d * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{conditional_pdf, exact_moment, normalization, ProbeObservable};
    use crate::probe::{GridProbe, UniformGrid};
    use crate::weakvalues::normal_weak_value;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn probe() -> GaussianProbe {
        GaussianProbe::new(0.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn weak_value_examples() {
        let z = [0.0, 0.0, 1.0];
        let w = spin_weak_values(&SpinSetup::new(z, z, z, 0.1, probe()).unwrap());
        assert_eq!((w.alpha0, w.alpha1, w.alpha11), (1.0, Complex64::new(1.0, 0.0), 1.0));
        let w = spin_weak_values(&SpinSetup::coplanar(FRAC_PI_2, 0.1, probe()));
        assert!((w.alpha0 - 0.5).abs() < 1e-15 && (w.alpha1 - 0.5).norm() < 1e-15);
        assert!((w.alpha11 - 0.5).abs() < 1e-15);
        let w = spin_weak_values(&SpinSetup::coplanar(PI, 0.1, probe()));
        assert!(w.alpha0.abs() < 1e-15 && w.alpha1.norm() < 1e-15 && (w.alpha11 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weak_values_match_matrix_traces() {
        let s = SpinSetup::new([0.3, -0.2, 0.5], [-0.1, 0.7, 0.2], [0.6, 0.0, 0.8], 0.1, probe()).unwrap();
        let m = s.to_measurement_setup().unwrap();
        let w = spin_weak_values(&s);
        let nv = |j, k| normal_weak_value(m.rho_i(), m.rho_f(), m.observable(), j, k, 0.0, 0.0).unwrap();
        assert!((nv(0, 0) - w.alpha0).norm() < 1e-12);
        assert!((nv(1, 0) - w.alpha1).norm() < 1e-12);
        assert!((nv(1, 1) - w.alpha11).norm() < 1e-12);
    }

    #[test]
    fn validation() {
        let z = [0.0, 0.0, 1.0];
        assert!(SpinSetup::new([0.0, 0.0, 1.1], z, z, 0.1, probe()).is_err());
        assert!(SpinSetup::new(z, z, [0.0, 0.0, 0.9], 0.1, probe()).is_err());
        assert!(SpinSetup::new([0.0; 3], [0.0, 0.3, 0.0], z, 0.1, probe()).is_ok());
    }

    #[test]
    fn pdf_matches_exact_engine() {
        for q_bar in [0.0, 1.0] {
            for k in 0..=8 {
                let th = PI * f64::from(k) / 8.0;
                let g = GaussianProbe::new(q_bar, 1.0, 0.5).unwrap();
                let s = SpinSetup::coplanar(th, 0.05, g);
                let a = spin_pdf(&s, &ProbeState::Gaussian(g)).unwrap();
                let b = conditional_pdf(&s.to_measurement_setup().unwrap(), &ProbeObservable::MomentumP).unwrap();
                assert_eq!(a.support, b.support);
                let err = a.pdf.iter().zip(&b.pdf).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                assert!(err < 1e-8, "θ = {th}: {err}");
                assert!((a.total() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pdf_with_grid_probe_matches_exact_engine() {
        let grid = UniformGrid::new(256, 0.0, 28.0).unwrap();
        let gp = GridProbe::mixture(
            &[
                (0.5, GaussianProbe::new(-0.6, 1.0, 0.5).unwrap()),
                (0.5, GaussianProbe::new(1.1, 0.9, 0.6).unwrap()),
            ],
            grid,
        )
        .unwrap();
        let probe = ProbeState::Grid(gp.clone());
        for th in [0.4, 2.0, PI] {
            let s = SpinSetup::coplanar(th, 0.2, GaussianProbe::new(0.0, 1.0, 0.5).unwrap());
            let a = spin_pdf(&s, &probe).unwrap();
            let m = s.to_measurement(gp.clone()).unwrap();
            let b = conditional_pdf(&m, &ProbeObservable::MomentumP).unwrap();
            assert!((a.normalization_n - normalization(&m)).abs() < 1e-12);
            let err = a.pdf.iter().zip(&b.pdf).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-8, "θ = {th}: {err}");
        }
    }

    #[test]
    fn pdf_limiting_cases() {
        let g = probe();
        let s = SpinSetup::coplanar(1.0, 0.0, g);
        let d = spin_pdf(&s, &ProbeState::Gaussian(g)).unwrap();
        for (p, v) in d.support.iter().zip(&d.pdf) {
            assert!((v - g.p_density(*p)).abs() < 1e-14);
        }
        let z = [0.0, 0.0, 1.0];
        let s = SpinSetup::new(z, z, z, 0.3, g).unwrap();
        let d = spin_pdf(&s, &ProbeState::Gaussian(g)).unwrap();
        for (p, v) in d.support.iter().zip(&d.pdf) {
            assert!((v - g.p_density(*p - 0.3)).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_moments_match_engine() {
        for k in 0..=8 {
            let th = PI * f64::from(k) / 8.0;
            let s = SpinSetup::coplanar(th, 0.05, GaussianProbe::new(0.3, 1.0, 0.5).unwrap());
            let m = s.to_measurement_setup().unwrap();
            for j in 0..=8 {
                let a = spin_exact_moment(&s, j).unwrap();
                let b = exact_moment(&m, &ProbeObservable::MomentumP, j).unwrap();
                assert!((a - b).abs() < 1e-8 * b.abs().max(1e-3), "θ={th} j={j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn first_moment_formula() {
        let s = SpinSetup::coplanar(1.1, 0.05, probe());
        let w = spin_weak_values(&s);
        let n = spin_normalization(&s, &ProbeState::Gaussian(probe()));
        assert!((spin_exact_moment(&s, 1).unwrap() - 0.05 * w.alpha1.re / n).abs() < 1e-16);
    }

    #[test]
    fn interpolation_examples() {
        let s = SpinSetup::coplanar(0.3, 0.05, probe());
        let a = spin_interp_moment(&s, 1).unwrap();
        assert!((a - 0.05 * (0.15f64).tan()).abs() < 1e-3 * 0.05);
        let s = SpinSetup::coplanar(PI, 0.05, probe());
        assert!(spin_interp_moment(&s, 3).unwrap().abs() < 1e-15);
        let scaled = (spin_interp_moment(&s, 2).unwrap() - 0.25) / (2.0 * 0.25);
        assert!((scaled - 1.0).abs() < 0.01);
        assert!(matches!(spin_interp_moment(&s, 101), Err(Error::BeyondValidity { .. })));
    }

    #[test]
    fn plateau_at_orthogonality() {
        let s = SpinSetup::coplanar(PI, 0.05, GaussianProbe::new(0.0, 1.0, 1.0).unwrap());
        assert!((universal_scaling(&s, 2).unwrap() - 0.25).abs() < 0.0025);
        assert!((spin_scaled_moment(&s, 2).unwrap() - 0.25).abs() < 0.0025);
        let s = SpinSetup::new([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.05, probe()).unwrap();
        assert!(universal_scaling(&s, 2).unwrap() < 0.01);
    }

    #[test]
    fn log_space_agrees_with_direct_sum() {
        let s = SpinSetup::coplanar(2.0, 0.1, probe());
        for j in [2, 4, 10, 20] {
            let direct = spin_exact_moment(&s, j).unwrap();
            let pj = probe().p_moment(j);
            let scaled = spin_scaled_moment(&s, j).unwrap();
            assert!(((direct - pj) / (f64::from(j) * pj) - scaled).abs() < 1e-10 * scaled.abs());
        }
        assert!(spin_scaled_moment(&s.with_lambda(0.05), 1000).unwrap().is_finite());
        assert!(spin_exact_moment(&s, 1001).is_err());
    }

    fn rotation(ax: f64, ay: f64, az: f64) -> [[f64; 3]; 3] {
        let (sx, cx) = ax.sin_cos();
        let (sy, cy) = ay.sin_cos();
        let (sz, cz) = az.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            c
        };
        mul(rz, mul(ry, rx))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rotation_invariance(th in 0.0..PI, ax in -PI..PI, ay in -PI..PI, az in -PI..PI, lam in 0.01..0.3f64) {
            let s = SpinSetup::new([0.0, 0.0, 0.9], [0.8 * th.sin(), 0.0, 0.8 * th.cos()], [0.6, 0.8, 0.0], lam, probe()).unwrap();
            let r = s.rotated(rotation(ax, ay, az));
            let (a, b) = (spin_weak_values(&s), spin_weak_values(&r));
            prop_assert!((a.alpha0 - b.alpha0).abs() < 1e-10);
            prop_assert!((a.alpha1 - b.alpha1).norm() < 1e-10);
            prop_assert!((a.alpha11 - b.alpha11).abs() < 1e-10);
            for j in 1..=4 {
                let (x, y) = (spin_exact_moment(&s, j).unwrap(), spin_exact_moment(&r, j).unwrap());
                prop_assert!((x - y).abs() < 1e-10);
            }
            let ps = ProbeState::Gaussian(probe());
            let (x, y) = (spin_pdf(&s, &ps).unwrap(), spin_pdf(&r, &ps).unwrap());
            for (u, v) in x.pdf.iter().zip(&y.pdf) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }

        #[test]
        fn normalization_matches_engine(th in 0.0..PI, q_bar in -1.0..1.0f64, lam in 0.0..0.5f64) {
            let g = GaussianProbe::new(q_bar, 1.0, 0.7).unwrap();
            let s = SpinSetup::coplanar(th, lam, g);
            let a = spin_normalization(&s, &ProbeState::Gaussian(g));
            let b = normalization(&s.to_measurement_setup().unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
