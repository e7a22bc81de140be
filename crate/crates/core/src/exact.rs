//! Exact conditional statistics of the probe after post-selection.
//!
//! Gaussian probes read out in `p` or `q` are handled in closed form through
//! the selection kernel; everything else goes through the probe grid, where
//! the conditional kernel is `ρ̌₀(q, q') Z^w(λq, λq') / N`.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::hilbert::{DensityMatrix, SystemObservable};
use crate::probe::{GaussianProbe, GridProbe, ProbeState, UniformGrid};
use crate::util::shifted_normal_moment;
use crate::weakvalues::SelectionKernel;
use crate::{CMatrix, Error, Result};

/// Relative tail weight of `|o|^j P(o)` tolerated in the outer grid cells.
pub const TAIL_TOL: f64 = 1e-7;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Coupling strength, pre/post-selection, system observable and probe.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetup {
    lambda: f64,
    rho_i: DensityMatrix,
    rho_f: DensityMatrix,
    observable: SystemObservable,
    probe: ProbeState,
    kernel: SelectionKernel,
}

impl MeasurementSetup {
    pub fn new(
        lambda: f64,
        rho_i: DensityMatrix,
        rho_f: DensityMatrix,
        observable: SystemObservable,
        probe: impl Into<ProbeState>,
    ) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("λ = {lambda} is not finite")));
        }
        let kernel = SelectionKernel::new(&rho_i, &rho_f, &observable)?;
        Ok(Self { lambda, rho_i, rho_f, observable, probe: probe.into(), kernel })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho_i(&self) -> &DensityMatrix {
        &self.rho_i
    }

    pub fn rho_f(&self) -> &DensityMatrix {
        &self.rho_f
    }

    pub fn observable(&self) -> &SystemObservable {
        &self.observable
    }

    pub fn probe(&self) -> &ProbeState {
        &self.probe
    }

    pub fn kernel(&self) -> &SelectionKernel {
        &self.kernel
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_probe(&self, probe: impl Into<ProbeState>) -> Self {
        Self { probe: probe.into(), ..self.clone() }
    }

    pub fn with_rho_f(&self, rho_f: DensityMatrix) -> Result<Self> {
        Self::new(self.lambda, self.rho_i.clone(), rho_f, self.observable.clone(), self.probe.clone())
    }

    /// Largest momentum kick `|λ|·max|a|`.
    pub fn max_shift(&self) -> f64 {
        self.lambda.abs() * self.kernel.max_abs_eigenvalue()
    }

    /// The probe on a grid wide enough in `p` for every kick.
    pub fn grid_probe(&self) -> Result<GridProbe> {
        self.probe.to_grid_auto(self.max_shift())
    }
}

/// Hermitian operator on the probe grid with its spectral decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOperator {
    grid: UniformGrid,
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl GridOperator {
    pub fn from_matrix(grid: UniformGrid, matrix: CMatrix) -> Result<Self> {
        let n = grid.len();
        if matrix.shape() != (n, n) {
            return Err(Error::DimMismatch { expected: n, got: matrix.nrows() });
        }
        let scale = matrix.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let defect = crate::hilbert::hermitian_defect(&matrix);
        if defect > crate::hilbert::EPS_HERM * scale {
            return Err(Error::NonHermitian(defect));
        }
        let herm = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { grid, matrix: herm, eigenvalues, eigenvectors })
    }

    /// Multiplication operator `f(q̂)`.
    pub fn from_q_function(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let n = grid.len();
        let vals: Vec<f64> = grid.qs().into_iter().map(f).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let matrix = CMatrix::from_fn(n, n, |r, c| if r == c { Complex64::new(vals[r], 0.0) } else { C0 });
        let eigenvectors =
            CMatrix::from_fn(n, n, |r, c| if r == order[c] { Complex64::new(1.0, 0.0) } else { C0 });
        Self { grid, matrix, eigenvalues: order.iter().map(|&k| vals[k]).collect(), eigenvectors }
    }

    /// `f(p̂)` built from its samples on the momentum grid.
    pub fn from_p_function(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples: Vec<Complex64> = grid.ps().into_iter().map(|p| Complex64::new(f(p), 0.0)).collect();
        Self::from_matrix(grid, grid.p_function_matrix(&samples))
    }

    /// Oscillator number operator `((q̂-c)²/σ² + σ²p̂²)/2 - 1/2`.
    pub fn number_operator(grid: UniformGrid, center: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("oscillator width {sigma}")));
        }
        let s2 = sigma * sigma;
        let samples: Vec<Complex64> =
            grid.ps().into_iter().map(|p| Complex64::new(0.5 * s2 * p * p, 0.0)).collect();
        let mut m = grid.p_function_matrix(&samples);
        for (x, q) in grid.qs().into_iter().enumerate() {
            m[(x, x)] += Complex64::new(0.5 * (q - center).powi(2) / s2 - 0.5, 0.0);
        }
        Self::from_matrix(grid, m)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// `⟨v_m| M |v_m⟩` for every eigenvector.
    pub fn diagonal_in_eigenbasis(&self, m: &CMatrix) -> Vec<Complex64> {
        let mv = m * &self.eigenvectors;
        (0..self.grid.len())
            .map(|c| self.eigenvectors.column(c).dotc(&mv.column(c)))
            .collect()
    }
}

/// Probe observable read out after the coupling.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeObservable {
    PositionQ,
    MomentumP,
    Matrix(Arc<GridOperator>),
}

impl From<GridOperator> for ProbeObservable {
    fn from(op: GridOperator) -> Self {
        ProbeObservable::Matrix(Arc::new(op))
    }
}

/// Representation for conditional kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Q,
    P,
}

/// Conditional probe kernel `ρ(·,·|f)` times the cell width.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalKernel {
    pub representation: Representation,
    pub grid: UniformGrid,
    pub kernel: CMatrix,
    pub normalization: f64,
}

impl ConditionalKernel {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.kernel[(k, k)].re).collect()
    }
}

/// Conditional law of a probe readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    /// Outcome values (grid points or distinct eigenvalues).
    pub support: Vec<f64>,
    /// Probability density (continuous readout) or mass (discrete spectrum).
    pub pdf: Vec<f64>,
    /// Cell width for densities; `None` for point masses.
    pub cell_width: Option<f64>,
    /// `N`, proportional to the post-selection probability.
    pub normalization_n: f64,
}

impl ConditionalDistribution {
    /// Probability carried by each support point.
    pub fn masses(&self) -> Vec<f64> {
        let w = self.cell_width.unwrap_or(1.0);
        self.pdf.iter().map(|d| d * w).collect()
    }

    pub fn total(&self) -> f64 {
        self.masses().iter().sum()
    }

    pub fn moment(&self, j: u32) -> f64 {
        self.support
            .iter()
            .zip(self.masses())
            .map(|(o, m)| m * o.powi(j as i32))
            .sum()
    }

    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.masses()
            .into_iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }
}

fn check_n(n: f64) -> Result<f64> {
    if !(n.is_finite() && n > 1e-300) {
        return Err(Error::ZeroPostselection(n));
    }
    Ok(n)
}

/// Gaussian weight `e^{iλq̄δ - λ²ΔQ²δ²/2}` with `δ = a - a'`.
fn gaussian_weight(g: &GaussianProbe, lambda: f64, a: f64, ap: f64) -> Complex64 {
    let d = lambda * (a - ap);
    Complex64::from_polar((-0.5 * d * d * g.delta_q() * g.delta_q()).exp(), d * g.q_bar())
}

fn grid_normalization(kernel: &SelectionKernel, lambda: f64, probe: &GridProbe) -> f64 {
    let gr = probe.grid();
    (0..gr.len())
        .map(|x| {
            let q = gr.q(x);
            probe.kernel()[(x, x)].re * kernel.weak_charfunc(lambda * q, lambda * q).re
        })
        .sum()
}

/// `N = ∫dq ρ̌₀(q,q) Z^w(λq, λq)`.
pub fn normalization(s: &MeasurementSetup) -> f64 {
    match s.probe() {
        ProbeState::Gaussian(g) => s
            .kernel()
            .contract(|a, ap| gaussian_weight(g, s.lambda(), a, ap))
            .re,
        ProbeState::Grid(gp) => grid_normalization(s.kernel(), s.lambda(), gp),
    }
}

/// Conditional kernel on an explicit grid probe, in the q-representation.
fn conditional_q_kernel(s: &MeasurementSetup, probe: &GridProbe) -> Result<ConditionalKernel> {
    let gr = *probe.grid();
    let a = s.kernel().eigenvalues();
    let lam = s.lambda();
    let e = CMatrix::from_fn(gr.len(), a.len(), |x, k| Complex64::from_polar(1.0, lam * a[k] * gr.q(x)));
    let z = &e * s.kernel().g() * e.adjoint();
    let n = check_n(grid_normalization(s.kernel(), lam, probe))?;
    let inv = Complex64::new(1.0 / n, 0.0);
    let kernel = probe.kernel().component_mul(&z) * inv;
    Ok(ConditionalKernel { representation: Representation::Q, grid: gr, kernel, normalization: n })
}

/// `ρ(·,·|f)` in the requested representation.
pub fn conditional_probe_state(s: &MeasurementSetup, rep: Representation) -> Result<ConditionalKernel> {
    let probe = s.grid_probe()?;
    let ck = conditional_q_kernel(s, &probe)?;
    Ok(match rep {
        Representation::Q => ck,
        Representation::P => ConditionalKernel {
            representation: Representation::P,
            kernel: ck.grid.to_momentum(&ck.kernel),
            ..ck
        },
    })
}

fn grid_probe_for(s: &MeasurementSetup, op: &GridOperator) -> Result<GridProbe> {
    match s.probe() {
        ProbeState::Gaussian(g) => GridProbe::from_gaussian(g, *op.grid()),
        ProbeState::Grid(gp) => {
            if gp.grid() != op.grid() {
                return Err(Error::InvalidGrid("observable and probe grids differ".into()));
            }
            Ok(gp.clone())
        }
    }
}

/// Groups equal eigenvalues (within `tol`) and sums their weights.
fn cluster(values: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let mut support: Vec<f64> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for (&v, &w) in values.iter().zip(weights) {
        match support.last() {
            Some(&last) if v - last <= tol => {
                *mass.last_mut().unwrap() += w;
                count += 1;
                let l = support.len() - 1;
                support[l] += (v - support[l]) / count as f64;
            }
            _ => {
                support.push(v);
                mass.push(w);
                count = 1;
            }
        }
    }
    (support, mass)
}

/// `P(o|f)` for a probe readout.
pub fn conditional_pdf(s: &MeasurementSetup, obs: &ProbeObservable) -> Result<ConditionalDistribution> {
    match obs {
        ProbeObservable::PositionQ | ProbeObservable::MomentumP => {
            let rep = if *obs == ProbeObservable::PositionQ { Representation::Q } else { Representation::P };
            let ck = conditional_probe_state(s, rep)?;
            let (support, width) = match rep {
                Representation::Q => (ck.grid.qs(), ck.grid.dq()),
                Representation::P => (ck.grid.ps(), ck.grid.dp()),
            };
            let pdf = ck.diagonal().into_iter().map(|m| m.max(0.0) / width).collect();
            Ok(ConditionalDistribution { support, pdf, cell_width: Some(width), normalization_n: ck.normalization })
        }
        ProbeObservable::Matrix(op) => {
            let probe = grid_probe_for(s, op)?;
            let ck = conditional_q_kernel(s, &probe)?;
            let w: Vec<f64> = op.diagonal_in_eigenbasis(&ck.kernel).iter().map(|z| z.re.max(0.0)).collect();
            let (support, pdf) = cluster(op.eigenvalues(), &w);
            Ok(ConditionalDistribution { support, pdf, cell_width: None, normalization_n: ck.normalization })
        }
    }
}

/// Outcomes and joint probabilities `P(o, f)`, summing to `N`.
pub fn joint_probabilities(s: &MeasurementSetup, obs: &ProbeObservable) -> Result<Vec<(f64, f64)>> {
    let d = conditional_pdf(s, obs)?;
    let n = d.normalization_n;
    Ok(d.support.iter().copied().zip(d.masses().into_iter().map(|m| m * n)).collect())
}

/// `P(o ∈ [lo, hi), f)`.
pub fn joint_prob(s: &MeasurementSetup, obs: &ProbeObservable, lo: f64, hi: f64) -> Result<f64> {
    Ok(joint_probabilities(s, obs)?
        .into_iter()
        .filter(|(o, _)| *o >= lo && *o < hi)
        .map(|(_, p)| p)
        .sum())
}

/// `Z(χ|f) = Tr{e^{iχô} ρ(·,·|f)}`.
pub fn conditional_charfunc(s: &MeasurementSetup, obs: &ProbeObservable, chi: f64) -> Result<Complex64> {
    let lam = s.lambda();
    match (obs, s.probe()) {
        (ProbeObservable::MomentumP, ProbeState::Gaussian(g)) => {
            let n = check_n(normalization(s))?;
            let z = s.kernel().contract(|a, ap| {
                gaussian_weight(g, lam, a, ap) * Complex64::from_polar(1.0, 0.5 * lam * chi * (a + ap))
            });
            Ok(z * g.p_charfunc(chi) / n)
        }
        (ProbeObservable::PositionQ, ProbeState::Gaussian(g)) => {
            let n = check_n(normalization(s))?;
            Ok(s.kernel().contract(|a, ap| g.q_charfunc(chi + lam * (a - ap), 0)) / n)
        }
        _ => {
            let d = conditional_pdf(s, obs)?;
            Ok(d.support
                .iter()
                .zip(d.masses())
                .map(|(o, m)| Complex64::from_polar(m, chi * o))
                .sum())
        }
    }
}

/// Characteristic function of a grid observable at many `χ` from a single
/// diagonalization.
pub fn conditional_charfuncs(s: &MeasurementSetup, obs: &ProbeObservable, chis: &[f64]) -> Result<Vec<Complex64>> {
    if let (ProbeObservable::PositionQ | ProbeObservable::MomentumP, ProbeState::Gaussian(_)) = (obs, s.probe()) {
        return chis.iter().map(|&c| conditional_charfunc(s, obs, c)).collect();
    }
    let d = conditional_pdf(s, obs)?;
    let m = d.masses();
    Ok(chis
        .iter()
        .map(|&chi| d.support.iter().zip(&m).map(|(o, w)| Complex64::from_polar(*w, chi * o)).sum())
        .collect())
}

/// `⟨o^j⟩_f`.
pub fn exact_moment(s: &MeasurementSetup, obs: &ProbeObservable, j: u32) -> Result<f64> {
    if j == 0 {
        return Ok(1.0);
    }
    let lam = s.lambda();
    match (obs, s.probe()) {
        (ProbeObservable::MomentumP, ProbeState::Gaussian(g)) => {
            let n = check_n(normalization(s))?;
            // p = p' + λ(a + a')/2 with p' ~ N(0, ΔP²) on each (a, a') branch.
            let v = s.kernel().contract(|a, ap| {
                gaussian_weight(g, lam, a, ap)
                    * shifted_normal_moment(Complex64::new(0.5 * lam * (a + ap), 0.0), g.delta_p(), j)
            });
            Ok(v.re / n)
        }
        (ProbeObservable::PositionQ, ProbeState::Gaussian(g)) => {
            let n = check_n(normalization(s))?;
            Ok((s.kernel().contract(|a, ap| g.q_charfunc(lam * (a - ap), j)) / n).re)
        }
        _ => {
            let d = conditional_pdf(s, obs)?;
            check_tail(&d, j)?;
            Ok(d.moment(j))
        }
    }
}

/// Rejects moments whose integrand still carries weight at the grid edges.
fn check_tail(d: &ConditionalDistribution, j: u32) -> Result<()> {
    if d.cell_width.is_none() {
        return Ok(());
    }
    let m = d.masses();
    let n = m.len();
    let edge = (n / 32).max(1);
    let term = |i: usize| m[i] * d.support[i].abs().powi(j as i32);
    let total: f64 = (0..n).map(term).sum();
    let tail: f64 = (0..edge).chain(n - edge..n).map(term).sum();
    let rel = if total > 0.0 { tail / total } else { 0.0 };
    if rel > TAIL_TOL {
        return Err(Error::GridResolutionInsufficient { order: j, tail: rel });
    }
    Ok(())
}
