//! Second-order expansions in the coupling and their interpolating variants.
//!
//! All formulas are written in terms of the normal weak values
//! `α₀, α₁ = α_{1,0}, α_{1,1}, α₂ = α_{2,0}` and probe averages of
//! `u = q - q_c`. The expansion center `q_c` is zero unless `λ|q*|·max|a|`
//! exceeds [`Thresholds::large_shift`], in which case `q_c = q*` and the weak
//! values are evaluated at the shift `λq*`.

use num_complex::Complex64;

use crate::exact::{GridOperator, MeasurementSetup, ProbeObservable};
use crate::probe::{CharfuncKind, GridProbe, PFunction, ProbeState};
use crate::util::binom;
use crate::weakvalues::CanonicalWeakValues;
use crate::{CMatrix, Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tunable constants of the expansion engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Minimum `α₀` for canonical (A/B/C) forms.
    pub eps_orth: f64,
    /// `λ|q*|·max|a|` above which the shifted expansion is used.
    pub large_shift: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { eps_orth: crate::weakvalues::EPS_ORTH, large_shift: 0.2 }
    }
}

/// Which second-order formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExpansionVariant {
    /// Numerator and denominator both expanded to `λ²` (denominator `N₂`).
    Full2ndOrder,
    /// `α₂` dropped from the denominator (`N₂'`), finite for any selection.
    Interpolating,
    /// Canonical `A^w, B^w, C^w` form (denominator `N₂''`); fails near orthogonality.
    ABOnly,
}

/// Form of the momentum characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZpForm {
    /// Weak values at `z = λχ/2`; keeps the rigid shifts `p → p - λa`.
    Resummed,
    /// Strict expansion to `λ²`.
    Strict2nd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub order_used: u32,
    pub validity_n_star: f64,
}

/// The three second-order denominators.
#[derive(Debug, Clone, PartialEq)]
pub struct Denominators {
    pub n2: f64,
    pub n2_prime: f64,
    /// `N₂' / α₀`, unavailable for orthogonal selections.
    pub n2_second: Result<f64>,
}

/// Traces `Tr{u^a ô u^b ρ₀}` of a grid observable, kept per eigenvalue so
/// any function of `ô` costs O(n).
struct ObservableTraces {
    eigenvalues: Vec<f64>,
    // Indexed by (a, b) in the order 00, 10, 01, 11, 20, 02.
    diag: [Vec<Complex64>; 6],
}

impl ObservableTraces {
    fn new(op: &GridOperator, probe: &GridProbe, center: f64) -> Self {
        let gr = op.grid();
        let n = gr.len();
        let u: Vec<f64> = gr.qs().into_iter().map(|q| q - center).collect();
        let v = op.eigenvectors();
        // K u^a V for a = 0, 1, 2.
        let kuv: Vec<CMatrix> = (0..3)
            .map(|a| {
                let uv = CMatrix::from_fn(n, n, |r, c| v[(r, c)] * u[r].powi(a));
                probe.kernel() * uv
            })
            .collect();
        let d = |a: usize, b: i32| -> Vec<Complex64> {
            (0..n)
                .map(|m| {
                    (0..n)
                        .map(|x| v[(x, m)].conj() * u[x].powi(b) * kuv[a][(x, m)])
                        .sum()
                })
                .collect()
        };
        Self {
            eigenvalues: op.eigenvalues().to_vec(),
            diag: [d(0, 0), d(1, 0), d(0, 1), d(1, 1), d(2, 0), d(0, 2)],
        }
    }

    /// `[T00, T10, T01, T11, T20, T02]` with `T_ab = Tr{u^a f(ô) u^b ρ₀}`.
    fn traces(&self, f: impl Fn(f64) -> Complex64) -> [Complex64; 6] {
        let fv: Vec<Complex64> = self.eigenvalues.iter().map(|&o| f(o)).collect();
        let mut out = [Complex64::new(0.0, 0.0); 6];
        for (t, d) in out.iter_mut().zip(&self.diag) {
            *t = fv.iter().zip(d).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// Second-order expansion engine for one setup.
pub struct Expander<'a> {
    s: &'a MeasurementSetup,
    th: Thresholds,
    lam: f64,
    center: f64,
    shift: f64,
    probe: ProbeState,
    a0: f64,
    a1: Complex64,
    a11: f64,
    a2: Complex64,
    u1: f64,
    u2: f64,
}

impl<'a> Expander<'a> {
    pub fn new(s: &'a MeasurementSetup) -> Self {
        Self::with_thresholds(s, Thresholds::default())
    }

    pub fn with_thresholds(s: &'a MeasurementSetup, th: Thresholds) -> Self {
        let lam = s.lambda();
        let q_star = s.probe().q_star();
        let large = lam.abs() * q_star.abs() * scale(s) > th.large_shift;
        let center = if large { q_star } else { 0.0 };
        let shift = lam * center;
        let probe = if large { s.probe().translated(-center) } else { s.probe().clone() };
        let k = s.kernel();
        let u1 = probe.q_moment(1);
        let u2 = probe.q_moment(2);
        Self {
            s,
            th,
            lam,
            center,
            shift,
            a0: k.alpha(0, 0, 0.0, shift).re,
            a1: k.alpha(1, 0, 0.0, shift),
            a11: k.alpha(1, 1, 0.0, shift).re,
            a2: k.alpha(2, 0, 0.0, shift),
            probe,
            u1,
            u2,
        }
    }

    /// Expansion center `q_c` (zero unless the shifted path is active).
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn is_shifted(&self) -> bool {
        self.center != 0.0
    }

    pub fn denominators(&self) -> Denominators {
        let (l, r2, i1) = (self.lam, self.a2.re, self.a1.im);
        let n2p = self.a0 + 2.0 * l * self.u1 * i1 + l * l * self.u2 * self.a11;
        let n2 = n2p - l * l * self.u2 * r2;
        let n2_second = if self.a0 < self.th.eps_orth {
            Err(Error::OrthogonalStates(self.a0.abs()))
        } else {
            Ok(n2p / self.a0)
        };
        Denominators { n2, n2_prime: n2p, n2_second }
    }

    fn canonical(&self) -> Result<CanonicalWeakValues> {
        if self.a0 < self.th.eps_orth {
            return Err(Error::OrthogonalStates(self.a0.abs()));
        }
        CanonicalWeakValues::from_kernel(self.s.kernel(), 0.0, self.shift)
    }

    /// `Z_Q(χ)` to second order.
    pub fn charfunc_q(&self, chi: f64, v: ExpansionVariant) -> Result<Complex64> {
        let phase = Complex64::from_polar(1.0, chi * self.center);
        let e: Vec<Complex64> = (0..3)
            .map(|k| Ok(phase * self.probe.initial_charfunc(CharfuncKind::Q, chi, k)?))
            .collect::<Result<_>>()?;
        let l = self.lam;
        let d = self.denominators();
        Ok(match v {
            ExpansionVariant::Full2ndOrder => {
                (e[0] * self.a0 + e[1] * (2.0 * l * self.a1.im) + e[2] * (l * l * (self.a11 - self.a2.re))) / d.n2
            }
            ExpansionVariant::Interpolating => {
                (e[0] * self.a0 + e[1] * (2.0 * l * self.a1.im) + e[2] * (l * l * self.a11)) / d.n2_prime
            }
            ExpansionVariant::ABOnly => {
                let c = self.canonical()?;
                (e[0] + e[1] * (2.0 * l * c.a_w.im) + e[2] * (l * l * c.b_w)) / d.n2_second?
            }
        })
    }

    /// `n* = ΔP²/(λ·max|a|)²` for Gaussian probes, the analogous ratio otherwise.
    pub fn n_star(&self) -> f64 {
        let le = self.lam * scale(self.s);
        let dp = self.s.probe().p_spread();
        if le == 0.0 {
            f64::INFINITY
        } else {
            dp * dp / (le * le)
        }
    }

    /// `Σ` of the second-order moment corrections, `⟨p^j⟩ = overline{p^j} + num/den`.
    fn moment_parts(&self, j: u32, pj: [f64; 3], pj1: [f64; 2], pj2: f64) -> (f64, f64) {
        let l = self.lam;
        let jf = f64::from(j);
        let (r1, i1, r2, i2) = (self.a1.re, self.a1.im, self.a2.re, self.a2.im);
        let first = jf * pj1[0] * r1 + 2.0 * (pj[1] - pj[0] * self.u1) * i1;
        let second = 0.5 * binom(j, 2) * pj2 * (self.a11 + r2)
            + jf * pj1[1] * i2
            + (pj[2] - pj[0] * self.u2) * (self.a11 - r2);
        (pj[0], l * first + l * l * second)
    }

    fn finish_moment(&self, base: f64, corr: f64, v: ExpansionVariant) -> Result<f64> {
        let d = self.denominators();
        Ok(match v {
            ExpansionVariant::Full2ndOrder => base + corr / d.n2,
            ExpansionVariant::Interpolating => base + corr / d.n2_prime,
            ExpansionVariant::ABOnly => {
                // Same expansion divided through by α₀, i.e. in terms of A^w, B^w, C^w.
                if self.a0 < self.th.eps_orth {
                    return Err(Error::OrthogonalStates(self.a0.abs()));
                }
                base + (corr / self.a0) / (d.n2 / self.a0)
            }
        })
    }

    /// Gaussian-probe moment `⟨p^j⟩_f` to second order.
    pub fn moment_p_gaussian(&self, j: u32, v: ExpansionVariant) -> Result<MomentEstimate> {
        let g = self
            .probe
            .as_gaussian()
            .ok_or_else(|| Error::InvalidProbe("moment_p_gaussian needs a Gaussian probe".into()))?;
        let n_star = self.n_star();
        if f64::from(j) > n_star {
            return Err(Error::BeyondValidity { order: j, n_star });
        }
        if j == 0 {
            return Ok(MomentEstimate { value: 1.0, order_used: 2, validity_n_star: n_star });
        }
        let pm = |k: u32| g.p_moment(k);
        let pj = [pm(j), pm(j) * self.u1, pm(j) * self.u2];
        let pj1 = [pm(j - 1), pm(j - 1) * self.u1];
        let pj2 = if j >= 2 { pm(j - 2) } else { 0.0 };
        let (base, corr) = self.moment_parts(j, pj, pj1, pj2);
        Ok(MomentEstimate { value: self.finish_moment(base, corr, v)?, order_used: 2, validity_n_star: n_star })
    }

    /// Moment `⟨p^j⟩_f` to second order for any probe, through quasi-averages.
    pub fn moment_p_general(&self, j: u32, v: ExpansionVariant) -> Result<MomentEstimate> {
        if j > crate::probe::MAX_QUASI_ORDER {
            return Err(Error::InvalidParameter(format!("moment order {j} > {}", crate::probe::MAX_QUASI_ORDER)));
        }
        let n_star = self.n_star();
        if j == 0 {
            return Ok(MomentEstimate { value: 1.0, order_used: 2, validity_n_star: n_star });
        }
        let qa = |m: u32, k: u32| -> Result<f64> { Ok(self.probe.quasi_average(&PFunction::Power(m), k)?.re) };
        let pj = [qa(j, 0)?, qa(j, 1)?, qa(j, 2)?];
        let pj1 = [qa(j - 1, 0)?, qa(j - 1, 1)?];
        let pj2 = if j >= 2 { qa(j - 2, 0)? } else { 0.0 };
        let (base, corr) = self.moment_parts(j, pj, pj1, pj2);
        Ok(MomentEstimate { value: self.finish_moment(base, corr, v)?, order_used: 2, validity_n_star: n_star })
    }

    /// `E_k = overline{e^{iχp} u^k}` for k = 0, 1, 2.
    fn p_quasi(&self, chi: f64) -> Result<[Complex64; 3]> {
        Ok([
            self.probe.quasi_average(&PFunction::Exp(chi), 0)?,
            self.probe.quasi_average(&PFunction::Exp(chi), 1)?,
            self.probe.quasi_average(&PFunction::Exp(chi), 2)?,
        ])
    }

    /// `Z_P(χ|f)` in resummed or strict second-order form.
    pub fn charfunc_p(&self, chi: f64, form: ZpForm) -> Result<Complex64> {
        let e = self.p_quasi(chi)?;
        let l = self.lam;
        let n2 = self.denominators().n2;
        let num = match form {
            ZpForm::Strict2nd => {
                let (r1, i1, r2, i2) = (self.a1.re, self.a1.im, self.a2.re, self.a2.im);
                e[0] * (Complex64::new(self.a0, l * chi * r1) - 0.25 * l * l * chi * chi * (self.a11 + r2))
                    + e[1] * (2.0 * l * i1)
                    + e[1] * I * (l * l * chi * i2)
                    + e[2] * (l * l * (self.a11 - r2))
            }
            ZpForm::Resummed => {
                let z = 0.5 * l * chi;
                let k = self.s.kernel();
                let al = |j, kk| k.alpha(j, kk, z, self.shift);
                let im1 = (al(1, 0) - al(0, 1)) / (2.0 * I);
                let re2 = (al(2, 0) + al(0, 2)) * 0.5;
                e[0] * al(0, 0) + e[1] * im1 * (2.0 * l) + e[2] * (al(1, 1) - re2) * (l * l)
            }
        };
        Ok(num / n2)
    }

    fn obs_traces(&self, op: &GridOperator) -> Result<ObservableTraces> {
        let gp = match self.s.probe() {
            ProbeState::Gaussian(g) => GridProbe::from_gaussian(g, *op.grid())?,
            ProbeState::Grid(gp) => {
                if gp.grid() != op.grid() {
                    return Err(Error::InvalidGrid("observable and probe grids differ".into()));
                }
                gp.clone()
            }
        };
        Ok(ObservableTraces::new(op, &gp, self.center))
    }

    fn combine_full(&self, t: &[Complex64; 6]) -> Complex64 {
        let l = self.lam;
        let (r1, i1, r2, i2) = (self.a1.re, self.a1.im, self.a2.re, self.a2.im);
        t[0] * self.a0
            + (-I * (t[1] - t[2]) * r1 + (t[1] + t[2]) * i1) * l
            + (t[3] * (2.0 * self.a11) - (t[4] + t[5]) * r2 - I * (t[4] - t[5]) * i2) * (0.5 * l * l)
    }

    /// `Z_O(χ|f)` to second order (denominator `N₂`).
    pub fn charfunc_obs(&self, obs: &ProbeObservable, chi: f64) -> Result<Complex64> {
        match obs {
            ProbeObservable::PositionQ => self.charfunc_q(chi, ExpansionVariant::Full2ndOrder),
            ProbeObservable::MomentumP => self.charfunc_p(chi, ZpForm::Strict2nd),
            ProbeObservable::Matrix(op) => {
                let tr = self.obs_traces(op)?;
                Ok(self.combine_full(&tr.traces(|o| Complex64::from_polar(1.0, chi * o))) / self.denominators().n2)
            }
        }
    }

    /// `Z_O` at many `χ` sharing one set of grid traces.
    pub fn charfuncs_obs(&self, obs: &ProbeObservable, chis: &[f64]) -> Result<Vec<Complex64>> {
        match obs {
            ProbeObservable::Matrix(op) => {
                let tr = self.obs_traces(op)?;
                let n2 = self.denominators().n2;
                Ok(chis
                    .iter()
                    .map(|&c| self.combine_full(&tr.traces(|o| Complex64::from_polar(1.0, c * o))) / n2)
                    .collect())
            }
            _ => chis.iter().map(|&c| self.charfunc_obs(obs, c)).collect(),
        }
    }

    /// Traces `[T00, T10, T01, T11, T20, T02]` with `ô` itself in the middle.
    fn linear_traces(&self, obs: &ProbeObservable) -> Result<[Complex64; 6]> {
        let c = |x: f64| Complex64::new(x, 0.0);
        Ok(match obs {
            ProbeObservable::PositionQ => {
                let m = |k| self.probe.q_moment(k);
                // Multiplication operators commute; o = u + q_c.
                let t = |k: u32| c(m(k + 1) + self.center * m(k));
                [t(0), t(1), t(1), t(2), t(2), t(2)]
            }
            ProbeObservable::MomentumP => {
                let qa = |k| -> Result<f64> { Ok(self.probe.quasi_average(&PFunction::Power(1), k)?.re) };
                let (p0, p1, p2) = (qa(0)?, qa(1)?, qa(2)?);
                // Weyl-ordered products: u p = p u + i, u² p = p u² + 2iu.
                [
                    c(p0),
                    Complex64::new(p1, 0.5),
                    Complex64::new(p1, -0.5),
                    c(p2),
                    Complex64::new(p2, self.u1),
                    Complex64::new(p2, -self.u1),
                ]
            }
            ProbeObservable::Matrix(op) => self.obs_traces(op)?.traces(c),
        })
    }

    /// `⟨ô⟩_f` to second order.
    pub fn expectation_obs(&self, obs: &ProbeObservable, v: ExpansionVariant) -> Result<f64> {
        let t = self.linear_traces(obs)?;
        let d = self.denominators();
        let l = self.lam;
        let (r1, i1, r2, i2) = (self.a1.re, self.a1.im, self.a2.re, self.a2.im);
        let scale_t = t.iter().fold(1e-300f64, |m, z| m.max(z.norm()));
        // α₂ terms are kept whenever the q ô q average vanishes.
        let keep_c = t[3].norm() <= 1e-12 * scale_t.max(self.u2.abs());
        let first = (-I * (t[1] - t[2]) * r1 + (t[1] + t[2]) * i1).re;
        let c_terms = (-(t[4] + t[5]) * r2 - I * (t[4] - t[5]) * i2).re;
        match v {
            ExpansionVariant::Full2ndOrder => {
                Ok((t[0].re * self.a0 + l * first + 0.5 * l * l * (2.0 * t[3].re * self.a11 + c_terms)) / d.n2)
            }
            ExpansionVariant::Interpolating => {
                let c = if keep_c { c_terms } else { 0.0 };
                Ok((t[0].re * self.a0 + l * first + 0.5 * l * l * (2.0 * t[3].re * self.a11 + c)) / d.n2_prime)
            }
            ExpansionVariant::ABOnly => {
                let cw = self.canonical()?;
                let (ar, ai) = (cw.a_w.re, cw.a_w.im);
                let first = (-I * (t[1] - t[2]) * ar + (t[1] + t[2]) * ai).re;
                let c = if keep_c {
                    (-(t[4] + t[5]) * cw.c_w.re - I * (t[4] - t[5]) * cw.c_w.im).re
                } else {
                    0.0
                };
                Ok((t[0].re + l * first + 0.5 * l * l * (2.0 * t[3].re * cw.b_w + c)) / d.n2_second?)
            }
        }
    }

    /// Binomial-comparison diagnostics for the moment order `j`: for each
    /// weight `X ∈ {1, q, q²}`, the largest `|C(j,k) λ^{k-2} overline{X p^{j-k}}|`
    /// over `k > 2` relative to `|C(j,2) overline{X p^{j-2}}|`. Values near or
    /// above one signal that `j` is beyond the validity order.
    pub fn validity_diagnostics(&self, j: u32) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        if j < 3 {
            return Ok(out);
        }
        let l = self.lam * scale(self.s);
        for (w, o) in out.iter_mut().enumerate() {
            let avg = |m: u32| -> Result<f64> {
                Ok(self.probe.quasi_average(&PFunction::Power(m), w as u32)?.re)
            };
            let reference = (binom(j, 2) * avg(j - 2)?).abs();
            let mut worst: f64 = 0.0;
            for k in 3..=j {
                let term = (binom(j, k) * l.powi(k as i32 - 2) * avg(j - k)?).abs();
                worst = worst.max(term);
            }
            *o = if reference > 0.0 { worst / reference } else if worst > 0.0 { f64::INFINITY } else { 0.0 };
        }
        Ok(out)
    }
}

fn scale(s: &MeasurementSetup) -> f64 {
    let c = s.kernel().max_abs_eigenvalue();
    if c > 0.0 {
        c
    } else {
        1.0
    }
}

/// Partial sums `S_0 … S_{n_max}` of the series for `N` around `q = 0`.
pub fn n_series(s: &MeasurementSetup, n_max: u32) -> Result<Vec<f64>> {
    if n_max > 12 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} > 12")));
    }
    let k = s.kernel();
    let lam = s.lambda();
    let mut sums = Vec::with_capacity(n_max as usize + 1);
    let mut acc = 0.0;
    let mut fact = 1.0;
    for n in 0..=n_max {
        if n > 0 {
            fact *= f64::from(n);
        }
        let inner: Complex64 = (0..=n)
            .map(|j| k.alpha(j, n - j, 0.0, 0.0) * (binom(n, j) * if j % 2 == 0 { 1.0 } else { -1.0 }))
            .sum();
        let term = (I * lam).powu(n) * s.probe().q_moment(n) / fact * inner;
        acc += term.re;
        sums.push(acc);
    }
    Ok(sums)
}

pub fn denominators(s: &MeasurementSetup) -> Denominators {
    Expander::new(s).denominators()
}

pub fn charfunc_q(s: &MeasurementSetup, chi: f64, v: ExpansionVariant) -> Result<Complex64> {
    Expander::new(s).charfunc_q(chi, v)
}

pub fn moment_p_gaussian(s: &MeasurementSetup, j: u32, v: ExpansionVariant) -> Result<MomentEstimate> {
    Expander::new(s).moment_p_gaussian(j, v)
}

pub fn moment_p_general(s: &MeasurementSetup, j: u32, v: ExpansionVariant) -> Result<MomentEstimate> {
    Expander::new(s).moment_p_general(j, v)
}

pub fn charfunc_p(s: &MeasurementSetup, chi: f64, form: ZpForm) -> Result<Complex64> {
    Expander::new(s).charfunc_p(chi, form)
}

pub fn charfunc_obs(s: &MeasurementSetup, obs: &ProbeObservable, chi: f64) -> Result<Complex64> {
    Expander::new(s).charfunc_obs(obs, chi)
}

pub fn expectation_obs(s: &MeasurementSetup, obs: &ProbeObservable, v: ExpansionVariant) -> Result<f64> {
    Expander::new(s).expectation_obs(obs, v)
}

/// `Z_O^orth(χ) = ⟨q̂ e^{iχô} q̂⟩₀ / ⟨q̂²⟩₀`.
pub fn orthogonal_limit(probe: &ProbeState, obs: &ProbeObservable, chi: f64) -> Result<Complex64> {
    let q2 = probe.q_moment(2);
    if !(q2 > 0.0) {
        return Err(Error::ZeroQVariance);
    }
    let num = match obs {
        ProbeObservable::PositionQ => probe.initial_charfunc(CharfuncKind::Q, chi, 2)?,
        ProbeObservable::MomentumP => {
            // Weyl symbol of q e^{iχp} q is (q² - χ²/4) e^{iχp}.
            probe.quasi_average(&PFunction::Exp(chi), 2)?
                - probe.quasi_average(&PFunction::Exp(chi), 0)? * (0.25 * chi * chi)
        }
        ProbeObservable::Matrix(op) => {
            let gp = match probe {
                ProbeState::Gaussian(g) => GridProbe::from_gaussian(g, *op.grid())?,
                ProbeState::Grid(gp) => gp.clone(),
            };
            ObservableTraces::new(op, &gp, 0.0).traces(|o| Complex64::from_polar(1.0, chi * o))[3]
        }
    };
    Ok(num / q2)
}

/// `n* = ΔP²/(λ·max|a|)²`.
pub fn validity_order(s: &MeasurementSetup) -> Result<f64> {
    if s.probe().as_gaussian().is_none() {
        return Err(Error::InvalidProbe("validity order is defined for Gaussian probes".into()));
    }
    Ok(Expander::new(s).n_star())
}
