//! Initial probe states: parametric Gaussians and grid-discretized kernels.
//!
//! Grid kernels store `ρ̌₀(q_x, q_x')·dq`, so the diagonal is a probability
//! vector. The momentum representation uses the unitary DFT
//! `U_{kx} = n^{-1/2} e^{-i p_k q_x}` with `p_k = (k - n/2)·dp`,
//! `dp = 2π/(n·dq)`, i.e. `⟨p|q⟩ ∝ e^{-ipq}` for `[q̂, p̂] = i`.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::util::{is_power_of_two, ln_normal_moment, normal_moment, shifted_normal_moment};
use crate::{CMatrix, Error, Result};

/// Relative size of the kernel diagonal allowed at the grid edges.
pub const EPS_EDGE: f64 = 1e-12;
/// Highest power of q accepted in quasi-averages.
pub const MAX_QUASI_ORDER: u32 = 8;
/// Largest supported grid.
pub const MAX_GRID: usize = 8192;
/// Smallest supported grid.
pub const MIN_GRID: usize = 64;

const DIAG_SUM_TOL: f64 = 1e-8;

/// Gaussian Wigner function centered at `(q̄, 0)` with spreads `ΔQ`, `ΔP`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProbe {
    q_bar: f64,
    delta_q: f64,
    delta_p: f64,
}

impl GaussianProbe {
    pub fn new(q_bar: f64, delta_q: f64, delta_p: f64) -> Result<Self> {
        if !(q_bar.is_finite() && delta_q.is_finite() && delta_p.is_finite()) {
            return Err(Error::InvalidProbe("non-finite parameter".into()));
        }
        if delta_q <= 0.0 || delta_p <= 0.0 {
            return Err(Error::InvalidProbe(format!(
                "spreads must be positive (ΔQ = {delta_q}, ΔP = {delta_p})"
            )));
        }
        if 0.5 / delta_q > delta_p * (1.0 + 1e-12) {
            return Err(Error::InvalidProbe(format!(
                "ΔQ·ΔP = {} violates the uncertainty bound 1/2",
                delta_q * delta_p
            )));
        }
        Ok(Self { q_bar, delta_q, delta_p })
    }

    /// Minimum-uncertainty state, `ΔP = 1/(2ΔQ)`.
    pub fn pure(q_bar: f64, delta_q: f64) -> Result<Self> {
        Self::new(q_bar, delta_q, 0.5 / delta_q)
    }

    pub fn q_bar(&self) -> f64 {
        self.q_bar
    }

    pub fn delta_q(&self) -> f64 {
        self.delta_q
    }

    pub fn delta_p(&self) -> f64 {
        self.delta_p
    }

    /// `δp = 1/(2ΔQ)`: decay scale of the momentum off-diagonals.
    pub fn coherence_scale(&self) -> f64 {
        0.5 / self.delta_q
    }

    pub fn translated(&self, shift: f64) -> Self {
        Self { q_bar: self.q_bar + shift, ..*self }
    }

    /// `ρ̌₀(q, q')`.
    pub fn q_kernel(&self, q: f64, qp: f64) -> f64 {
        let s = 0.5 * (q + qp);
        let d = q - qp;
        normal_pdf(s - self.q_bar, self.delta_q) * (-0.5 * self.delta_p * self.delta_p * d * d).exp()
    }

    /// `ρ₀(p₁, p₂)` in the momentum representation.
    pub fn p_kernel(&self, p1: f64, p2: f64) -> Complex64 {
        let s = 0.5 * (p1 + p2);
        let d = p1 - p2;
        let mag = normal_pdf(s, self.delta_p) * (-0.5 * self.delta_q * self.delta_q * d * d).exp();
        Complex64::from_polar(mag, -d * self.q_bar)
    }

    pub fn p_density(&self, p: f64) -> f64 {
        normal_pdf(p, self.delta_p)
    }

    pub fn q_density(&self, q: f64) -> f64 {
        normal_pdf(q - self.q_bar, self.delta_q)
    }

    /// `overline{q^n}`.
    pub fn q_moment(&self, n: u32) -> f64 {
        shifted_normal_moment(Complex64::new(self.q_bar, 0.0), self.delta_q, n).re
    }

    /// `overline{p^j}`; zero for odd `j`.
    pub fn p_moment(&self, j: u32) -> f64 {
        normal_moment(j) * self.delta_p.powi(j as i32)
    }

    /// `ln overline{p^j}` for even `j`, finite up to very large orders.
    pub fn ln_p_moment(&self, j: u32) -> Result<f64> {
        if j % 2 == 1 {
            return Err(Error::InvalidParameter("odd Gaussian moments vanish".into()));
        }
        Ok(ln_normal_moment(j) + f64::from(j) * self.delta_p.ln())
    }

    /// `overline{q^n e^{iκq}}`.
    pub fn q_charfunc(&self, kappa: f64, n: u32) -> Complex64 {
        let dq2 = self.delta_q * self.delta_q;
        let pref = Complex64::from_polar((-0.5 * kappa * kappa * dq2).exp(), kappa * self.q_bar);
        let mu = Complex64::new(self.q_bar, kappa * dq2);
        pref * shifted_normal_moment(mu, self.delta_q, n)
    }

    /// `overline{e^{iχp}}`.
    pub fn p_charfunc(&self, chi: f64) -> f64 {
        (-0.5 * chi * chi * self.delta_p * self.delta_p).exp()
    }

    /// Grid that resolves this probe and its momentum shifts up to `max_shift`.
    pub fn auto_grid(&self, max_shift: f64) -> Result<UniformGrid> {
        let half = 12.0 * self.delta_q;
        let need = 12.0 * self.delta_p + max_shift.abs();
        let mut n = MIN_GRID;
        while PI * n as f64 / (2.0 * half) < need {
            n *= 2;
            if n > MAX_GRID {
                return Err(Error::InvalidGrid(format!(
                    "momentum range {need} needs more than {MAX_GRID} points"
                )));
            }
        }
        UniformGrid::new(n, self.q_bar, 2.0 * half)
    }
}

fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Uniform position grid `q_x = center + (x - n/2)·dq`, `dq = span/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    n: usize,
    q_min: f64,
    dq: f64,
}

impl UniformGrid {
    pub fn new(n: usize, center: f64, span: f64) -> Result<Self> {
        if !(MIN_GRID..=MAX_GRID).contains(&n) || !is_power_of_two(n) {
            return Err(Error::InvalidGrid(format!(
                "n_q = {n} must be a power of two in {MIN_GRID}..={MAX_GRID}"
            )));
        }
        if !(span.is_finite() && span > 0.0 && center.is_finite()) {
            return Err(Error::InvalidGrid(format!("bad span {span} or center {center}")));
        }
        let dq = span / n as f64;
        Ok(Self { n, q_min: center - 0.5 * span, dq })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dq)
    }

    pub fn span(&self) -> f64 {
        self.n as f64 * self.dq
    }

    pub fn q(&self, x: usize) -> f64 {
        self.q_min + x as f64 * self.dq
    }

    pub fn p(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dp()
    }

    pub fn qs(&self) -> Vec<f64> {
        (0..self.n).map(|x| self.q(x)).collect()
    }

    pub fn ps(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.p(k)).collect()
    }

    pub fn translated(&self, shift: f64) -> Self {
        Self { q_min: self.q_min + shift, ..*self }
    }

    fn phases(&self, sign: f64) -> Vec<Complex64> {
        let norm = 1.0 / (self.n as f64).sqrt();
        (0..self.n)
            .map(|k| Complex64::from_polar(norm, sign * self.p(k) * self.q_min))
            .collect()
    }

    /// Applies `U` to every column of `m` in place.
    pub fn dft_columns(&self, m: &mut CMatrix) {
        let n = self.n;
        assert_eq!(m.nrows(), n);
        let fft = FftPlanner::new().plan_fft_forward(n);
        let ph = self.phases(-1.0);
        let data = m.as_mut_slice();
        for col in data.chunks_exact_mut(n) {
            for x in (1..n).step_by(2) {
                col[x] = -col[x];
            }
        }
        fft.process(data);
        for col in data.chunks_exact_mut(n) {
            for (z, p) in col.iter_mut().zip(&ph) {
                *z *= p;
            }
        }
    }

    /// Applies `U†` to every column of `m` in place.
    pub fn idft_columns(&self, m: &mut CMatrix) {
        let n = self.n;
        assert_eq!(m.nrows(), n);
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let ph = self.phases(1.0);
        let data = m.as_mut_slice();
        for col in data.chunks_exact_mut(n) {
            for (z, p) in col.iter_mut().zip(&ph) {
                *z *= p;
            }
        }
        fft.process(data);
        for col in data.chunks_exact_mut(n) {
            for x in (1..n).step_by(2) {
                col[x] = -col[x];
            }
        }
    }

    /// `U M U†`.
    pub fn to_momentum(&self, m: &CMatrix) -> CMatrix {
        let mut a = m.clone();
        self.dft_columns(&mut a);
        let mut b = a.adjoint();
        self.dft_columns(&mut b);
        b.adjoint()
    }

    /// `U† M U`.
    pub fn to_position(&self, m: &CMatrix) -> CMatrix {
        let mut a = m.clone();
        self.idft_columns(&mut a);
        let mut b = a.adjoint();
        self.idft_columns(&mut b);
        b.adjoint()
    }

    /// Generating column of `U† diag(f) U`: entry `(x, x')` equals
    /// `(-1)^{x-x'}·c[(x - x') mod n]`.
    fn p_function_column(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut c = f.to_vec();
        FftPlanner::new().plan_fft_inverse(n).process(&mut c);
        let inv = 1.0 / n as f64;
        c.iter_mut().for_each(|z| *z *= inv);
        c
    }

    /// Dense position-space matrix of `f(p̂)` given its samples on the p-grid.
    pub fn p_function_matrix(&self, f: &[Complex64]) -> CMatrix {
        let n = self.n;
        let c = self.p_function_column(f);
        CMatrix::from_fn(n, n, |x, xp| {
            let d = (x + n - xp) % n;
            let sign = if (x + xp) % 2 == 0 { 1.0 } else { -1.0 };
            c[d] * sign
        })
    }
}

/// Function of the probe momentum entering a quasi-average.
#[derive(Debug, Clone, PartialEq)]
pub enum PFunction {
    /// `p^m` (`m = 0` is the constant 1).
    Power(u32),
    /// `e^{iχp}`.
    Exp(f64),
    /// Arbitrary samples on a grid probe's momentum grid.
    Sampled(Vec<Complex64>),
}

impl PFunction {
    fn sample(&self, grid: &UniformGrid) -> Result<Vec<Complex64>> {
        let ps = grid.ps();
        Ok(match self {
            PFunction::Power(m) => ps.iter().map(|p| Complex64::new(p.powi(*m as i32), 0.0)).collect(),
            PFunction::Exp(chi) => ps.iter().map(|p| Complex64::from_polar(1.0, chi * p)).collect(),
            PFunction::Sampled(v) => {
                if v.len() != grid.len() {
                    return Err(Error::DimMismatch { expected: grid.len(), got: v.len() });
                }
                v.clone()
            }
        })
    }
}

/// Probe kernel on a uniform position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProbe {
    grid: UniformGrid,
    kernel: CMatrix,
}

/// Probe kernel in the momentum representation, `ρ₀(p_k, p_k')·dp`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumKernel {
    pub grid: UniformGrid,
    pub kernel: CMatrix,
}

impl MomentumKernel {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.kernel[(k, k)].re).collect()
    }
}

impl GridProbe {
    /// Validates a user-supplied kernel `ρ̌₀(q_x, q_x')·dq`.
    pub fn from_kernel(grid: UniformGrid, kernel: CMatrix) -> Result<Self> {
        let n = grid.len();
        if kernel.shape() != (n, n) {
            return Err(Error::DimMismatch { expected: n, got: kernel.nrows() });
        }
        let defect = crate::hilbert::hermitian_defect(&kernel);
        if defect > crate::hilbert::EPS_HERM {
            return Err(Error::NonHermitian(defect));
        }
        let probe = Self::unchecked(grid, kernel)?;
        let min_eig = SymmetricEigen::new(probe.kernel.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eig < -crate::hilbert::EPS_PSD {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(probe)
    }

    /// Trace and boundary checks only; positivity is known by construction.
    fn unchecked(grid: UniformGrid, kernel: CMatrix) -> Result<Self> {
        let diag: Vec<f64> = (0..grid.len()).map(|x| kernel[(x, x)].re).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let edge = diag[0].abs().max(diag[diag.len() - 1].abs());
        let ratio = edge / max;
        if !(ratio < EPS_EDGE) {
            return Err(Error::SpanTooSmall { ratio, limit: EPS_EDGE });
        }
        let sum: f64 = diag.iter().sum();
        if (sum - 1.0).abs() > DIAG_SUM_TOL {
            return Err(Error::InvalidGrid(format!("kernel diagonal sums to {sum}")));
        }
        Ok(Self { grid, kernel })
    }

    /// Samples a Gaussian probe on `grid`.
    pub fn from_gaussian(p: &GaussianProbe, grid: UniformGrid) -> Result<Self> {
        Self::mixture(&[(1.0, *p)], grid)
    }

    /// Incoherent mixture `Σ w_c ρ_c` of Gaussian probes; weights are normalized.
    pub fn mixture(components: &[(f64, GaussianProbe)], grid: UniformGrid) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidProbe("empty mixture".into()));
        }
        if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidProbe("mixture weights must be non-negative".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidProbe("mixture weights sum to zero".into()));
        }
        let n = grid.len();
        let dq = grid.dq();
        let qs = grid.qs();
        let kernel = CMatrix::from_fn(n, n, |x, xp| {
            let v: f64 = components
                .iter()
                .map(|(w, g)| w * g.q_kernel(qs[x], qs[xp]))
                .sum();
            Complex64::new(v * dq / total, 0.0)
        });
        Self::unchecked(grid, kernel)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &CMatrix {
        &self.kernel
    }

    /// Initial position distribution (probabilities per grid cell).
    pub fn q_probabilities(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|x| self.kernel[(x, x)].re).collect()
    }

    pub fn p_representation(&self) -> MomentumKernel {
        MomentumKernel { grid: self.grid, kernel: self.grid.to_momentum(&self.kernel) }
    }

    pub fn from_p_representation(m: &MomentumKernel) -> Self {
        Self { grid: m.grid, kernel: m.grid.to_position(&m.kernel) }
    }

    /// Same kernel with every coordinate shifted by `shift`.
    pub fn translated(&self, shift: f64) -> Self {
        Self { grid: self.grid.translated(shift), kernel: self.kernel.clone() }
    }

    /// Proper average of a function of q.
    pub fn q_average(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        (0..self.grid.len())
            .map(|x| f(self.grid.q(x)) * self.kernel[(x, x)].re)
            .sum()
    }

    /// `overline{f(p) q^j}` as `Σ ((q_x + q_x')/2)^j ⟨x|f(p̂)|x'⟩ K[x', x]`.
    pub fn quasi_average(&self, f: &PFunction, j: u32) -> Result<Complex64> {
        Ok(self.quasi_averages(f, j)?[j as usize])
    }

    /// `overline{f(p) q^m}` for every `m ≤ j`.
    pub fn quasi_averages(&self, f: &PFunction, j: u32) -> Result<Vec<Complex64>> {
        if j > MAX_QUASI_ORDER {
            return Err(Error::InvalidParameter(format!("quasi-average order {j} > {MAX_QUASI_ORDER}")));
        }
        let n = self.grid.len();
        let c = self.grid.p_function_column(&f.sample(&self.grid)?);
        let qs = self.grid.qs();
        let mut out = vec![Complex64::new(0.0, 0.0); j as usize + 1];
        for x in 0..n {
            for xp in 0..n {
                let d = (x + n - xp) % n;
                let sign = if (x + xp) % 2 == 0 { 1.0 } else { -1.0 };
                let t = c[d] * self.kernel[(xp, x)] * sign;
                if t == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let s = 0.5 * (qs[x] + qs[xp]);
                let mut sp = 1.0;
                for o in out.iter_mut() {
                    *o += t * sp;
                    sp *= s;
                }
            }
        }
        Ok(out)
    }

    /// Momentum moment `overline{p^j}` from the p-diagonal.
    pub fn p_moment(&self, j: u32) -> f64 {
        let mk = self.p_representation();
        mk.diagonal()
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.grid.p(k).powi(j as i32))
            .sum()
    }

    /// Position of the largest diagonal entry.
    pub fn q_star(&self) -> f64 {
        let d = self.q_probabilities();
        let (xmax, _) = d
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        self.grid.q(xmax)
    }
}

/// Discretizes a Gaussian probe on `n_q` points spanning `span` around `q̄`.
pub fn to_grid(p: &GaussianProbe, n_q: usize, span: f64) -> Result<GridProbe> {
    let grid = UniformGrid::new(n_q, p.q_bar(), span)?;
    if span < 8.0 * p.delta_q() {
        let edge = (-0.5 * (0.5 * span / p.delta_q()).powi(2)).exp();
        return Err(Error::SpanTooSmall { ratio: edge, limit: EPS_EDGE });
    }
    GridProbe::from_gaussian(p, grid)
}

/// Which probe variable an initial characteristic function refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharfuncKind {
    /// `overline{q^n e^{iχq}}` (proper average).
    Q,
    /// `overline{q^n e^{iχp}}` (quasi-average).
    P,
}

/// Initial probe state ρ₀.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeState {
    Gaussian(GaussianProbe),
    Grid(GridProbe),
}

impl From<GaussianProbe> for ProbeState {
    fn from(g: GaussianProbe) -> Self {
        ProbeState::Gaussian(g)
    }
}

impl From<GridProbe> for ProbeState {
    fn from(g: GridProbe) -> Self {
        ProbeState::Grid(g)
    }
}

impl ProbeState {
    pub fn as_gaussian(&self) -> Option<&GaussianProbe> {
        match self {
            ProbeState::Gaussian(g) => Some(g),
            ProbeState::Grid(_) => None,
        }
    }

    pub fn translated(&self, shift: f64) -> Self {
        match self {
            ProbeState::Gaussian(g) => ProbeState::Gaussian(g.translated(shift)),
            ProbeState::Grid(g) => ProbeState::Grid(g.translated(shift)),
        }
    }

    /// `overline{q^n}`.
    pub fn q_moment(&self, n: u32) -> f64 {
        match self {
            ProbeState::Gaussian(g) => g.q_moment(n),
            ProbeState::Grid(g) => g.q_average(|q| Complex64::new(q.powi(n as i32), 0.0)).re,
        }
    }

    /// `overline{p^j}`.
    pub fn p_moment(&self, j: u32) -> f64 {
        match self {
            ProbeState::Gaussian(g) => g.p_moment(j),
            ProbeState::Grid(g) => g.p_moment(j),
        }
    }

    /// Position where the initial q-distribution peaks.
    pub fn q_star(&self) -> f64 {
        match self {
            ProbeState::Gaussian(g) => g.q_bar(),
            ProbeState::Grid(g) => g.q_star(),
        }
    }

    /// Standard deviation of p.
    pub fn p_spread(&self) -> f64 {
        match self {
            ProbeState::Gaussian(g) => g.delta_p(),
            ProbeState::Grid(g) => {
                let m1 = g.p_moment(1);
                (g.p_moment(2) - m1 * m1).max(0.0).sqrt()
            }
        }
    }

    /// Standard deviation of q.
    pub fn q_spread(&self) -> f64 {
        match self {
            ProbeState::Gaussian(g) => g.delta_q(),
            ProbeState::Grid(_) => {
                let m1 = self.q_moment(1);
                (self.q_moment(2) - m1 * m1).max(0.0).sqrt()
            }
        }
    }

    /// Symmetric-ordered average `overline{f(p) q^j}`.
    pub fn quasi_average(&self, f: &PFunction, j: u32) -> Result<Complex64> {
        if j > MAX_QUASI_ORDER {
            return Err(Error::InvalidParameter(format!("quasi-average order {j} > {MAX_QUASI_ORDER}")));
        }
        match self {
            ProbeState::Gaussian(g) => {
                // The Wigner function factorizes, and so does the Weyl symbol q^j f(p).
                let fp = match f {
                    PFunction::Power(m) => Complex64::new(g.p_moment(*m), 0.0),
                    PFunction::Exp(chi) => Complex64::new(g.p_charfunc(*chi), 0.0),
                    PFunction::Sampled(_) => {
                        return Err(Error::UnsupportedFunction(
                            "sampled p-functions need a grid probe".into(),
                        ))
                    }
                };
                Ok(fp * g.q_moment(j))
            }
            ProbeState::Grid(g) => g.quasi_average(f, j),
        }
    }

    /// `overline{q^n e^{iχq}}` or `overline{q^n e^{iχp}}`.
    pub fn initial_charfunc(&self, kind: CharfuncKind, chi: f64, weight_power: u32) -> Result<Complex64> {
        if weight_power > MAX_QUASI_ORDER {
            return Err(Error::InvalidParameter(format!(
                "weight power {weight_power} > {MAX_QUASI_ORDER}"
            )));
        }
        match (kind, self) {
            (CharfuncKind::Q, ProbeState::Gaussian(g)) => Ok(g.q_charfunc(chi, weight_power)),
            (CharfuncKind::Q, ProbeState::Grid(g)) => {
                Ok(g.q_average(|q| Complex64::from_polar(q.powi(weight_power as i32), chi * q)))
            }
            (CharfuncKind::P, _) => self.quasi_average(&PFunction::Exp(chi), weight_power),
        }
    }

    /// A grid version of this probe (the probe itself when already gridded).
    pub fn to_grid_auto(&self, max_shift: f64) -> Result<GridProbe> {
        match self {
            ProbeState::Gaussian(g) => {
                let grid = g.auto_grid(max_shift)?;
                GridProbe::from_gaussian(g, grid)
            }
            ProbeState::Grid(g) => Ok(g.clone()),
        }
    }
}
