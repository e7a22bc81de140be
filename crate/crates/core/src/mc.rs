//! Monte Carlo simulation of pre-selection, coupling, probe readout and
//! randomly accepted post-selection.
//!
//! Shots are drawn by inverse-CDF sampling from the exact joint table
//! `P(o, S)`, so statistical error is isolated from discretization error.
//! Each shot owns a ChaCha stream selected by its index, which makes the
//! ensemble independent of how shots are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::exact::{conditional_pdf, normalization, MeasurementSetup, ProbeObservable};
use crate::hilbert::{eigenprojector, validate_density, SystemObservable};
use crate::{CMatrix, Error, Result};

/// One post-selection outcome `S` of the final projective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PostOutcome {
    pub value: f64,
    pub projector: CMatrix,
    /// Acceptance probability `w(S)`.
    pub w: f64,
}

/// Everything needed to simulate the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Setup whose `ρ_f` is the normalized `Σ w(S) Π_S / W`.
    pub setup: MeasurementSetup,
    pub obs: ProbeObservable,
    pub outcomes: Vec<PostOutcome>,
    pub n_shots: u64,
    pub seed: u64,
    /// Highest moment order estimated from the accepted records.
    pub max_moment: u32,
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut out: Vec<f64> = Vec::new();
    for &v in values {
        if out.last().is_none_or(|&l| v - l > 1e-9 * scale) {
            out.push(v);
        }
    }
    out
}

impl ProtocolConfig {
    /// Post-selection by measuring `s_f`; `w[k]` is the acceptance probability of its
    /// `k`-th distinct eigenvalue (ascending). `setup`'s own `ρ_f` is replaced.
    pub fn new(
        setup: &MeasurementSetup,
        obs: ProbeObservable,
        s_f: &SystemObservable,
        w: &[f64],
        n_shots: u64,
        seed: u64,
    ) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::InvalidParameter("n_shots must be at least 1".into()));
        }
        if s_f.dim() != setup.rho_i().dim() {
            return Err(Error::DimMismatch { expected: setup.rho_i().dim(), got: s_f.dim() });
        }
        let values = distinct(s_f.eigenvalues());
        if w.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} acceptance probabilities for {} outcomes",
                w.len(),
                values.len()
            )));
        }
        if let Some(bad) = w.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!("acceptance probability {bad} outside [0, 1]")));
        }
        let scale = s_f.max_abs_eigenvalue().max(1.0);
        let outcomes: Vec<PostOutcome> = values
            .iter()
            .zip(w)
            .map(|(&value, &w)| PostOutcome { value, projector: eigenprojector(s_f, value, 1e-9 * scale), w })
            .collect();
        let d = setup.rho_i().dim();
        let mut rho_f = CMatrix::zeros(d, d);
        for o in &outcomes {
            rho_f += &o.projector * crate::Complex64::new(o.w, 0.0);
        }
        let big_w = rho_f.trace().re;
        if big_w <= 0.0 {
            return Err(Error::InvalidParameter("every outcome has zero acceptance".into()));
        }
        let rho_f = validate_density(&(rho_f / crate::Complex64::new(big_w, 0.0)))?;
        Ok(Self { setup: setup.with_rho_f(rho_f)?, obs, outcomes, n_shots, seed, max_moment: 4 })
    }

    /// Realizes `setup`'s `ρ_f` by measuring `ρ_f` itself and accepting each
    /// eigenvalue with probability proportional to it.
    pub fn from_setup(setup: &MeasurementSetup, obs: ProbeObservable, n_shots: u64, seed: u64) -> Result<Self> {
        let s_f = crate::hilbert::spectral_decompose(setup.rho_f().matrix())?;
        let values = distinct(s_f.eigenvalues());
        let top = values.iter().fold(0.0f64, |m, v| m.max(*v));
        let w: Vec<f64> = values.iter().map(|v| (v / top).clamp(0.0, 1.0)).collect();
        Self::new(setup, obs, &s_f, &w, n_shots, seed)
    }

    /// `W = Tr Σ w(S) Π_S`.
    pub fn big_w(&self) -> f64 {
        self.outcomes.iter().map(|o| o.w * o.projector.trace().re).sum()
    }

    /// Expected acceptance fraction `P(f) = W·N`.
    pub fn acceptance_probability(&self) -> f64 {
        self.big_w() * normalization(&self.setup)
    }

    /// Same protocol with every `w(S)` multiplied by `c`.
    pub fn scaled_acceptance(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidParameter(format!("scale {c} outside (0, 1]")));
        }
        let mut out = self.clone();
        for o in &mut out.outcomes {
            o.w *= c;
        }
        Ok(out)
    }
}

/// Result of a single shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shot {
    Accepted { bin: usize, o: f64, outcome: usize },
    Rejected,
}

/// Precomputed joint table `P(o, S)` and its cumulative sum.
#[derive(Debug, Clone)]
pub struct Sampler {
    support: Vec<f64>,
    cell_width: Option<f64>,
    n_bins: usize,
    w: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let reference = conditional_pdf(&cfg.setup, &cfg.obs)?;
        let nb = reference.support.len();
        let mut table: Vec<f64> = Vec::with_capacity(nb * cfg.outcomes.len());
        for o in &cfg.outcomes {
            let rank = o.projector.trace().re;
            let rho = validate_density(&(&o.projector / crate::Complex64::new(rank, 0.0)))?;
            let s = cfg.setup.with_rho_f(rho)?;
            let n = normalization(&s);
            if n > 1e-300 {
                let d = conditional_pdf(&s, &cfg.obs)?;
                if d.support.len() != nb {
                    return Err(Error::InvalidGrid("readout support differs between outcomes".into()));
                }
                table.extend(d.masses().into_iter().map(|p| p * n * rank));
            } else {
                table.extend(std::iter::repeat_n(0.0, nb));
            }
        }
        let (support, cell_width) = (reference.support, reference.cell_width);
        let total: f64 = table.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroPostselection(total));
        }
        let mut acc = 0.0;
        let cumulative = table
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(Self {
            n_bins: support.len(),
            support,
            cell_width,
            w: cfg.outcomes.iter().map(|o| o.w).collect(),
            cumulative,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cell_width(&self) -> Option<f64> {
        self.cell_width
    }

    /// Draws `(o, S)` from the joint law, then accepts with probability `w(S)`.
    pub fn sample_run<R: Rng + ?Sized>(&self, rng: &mut R) -> Shot {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        let (outcome, bin) = (idx / self.n_bins, idx % self.n_bins);
        let x: f64 = rng.random();
        if x < self.w[outcome] {
            Shot::Accepted { bin, o: self.support[bin], outcome }
        } else {
            Shot::Rejected
        }
    }
}

/// RNG for shot `index` of the run seeded with `seed`.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Single shot of the protocol with its own RNG state.
pub fn sample_run<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> Result<Shot> {
    Ok(Sampler::new(cfg)?.sample_run(rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSample {
    pub j: u32,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub o_low: f64,
    pub o_high: f64,
    pub count: u64,
    /// Density for continuous readouts, probability for discrete ones.
    pub density: f64,
    pub density_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub support: Vec<f64>,
    pub cell_width: Option<f64>,
    pub counts: Vec<u64>,
    pub accepted: u64,
    pub total: u64,
    pub moment_estimates: Vec<MomentSample>,
}

impl EnsembleResult {
    pub fn acceptance_fraction(&self) -> f64 {
        self.accepted as f64 / self.total as f64
    }

    pub fn acceptance_se(&self) -> f64 {
        let p = self.acceptance_fraction();
        (p * (1.0 - p) / self.total as f64).sqrt()
    }

    pub fn histogram(&self) -> Vec<HistogramBin> {
        let n = self.accepted.max(1) as f64;
        let width = self.cell_width.unwrap_or(1.0);
        self.support
            .iter()
            .zip(&self.counts)
            .map(|(&o, &c)| {
                let f = c as f64 / n;
                let half = 0.5 * self.cell_width.unwrap_or(0.0);
                HistogramBin {
                    o_low: o - half,
                    o_high: o + half,
                    count: c,
                    density: f / width,
                    density_se: (f * (1.0 - f) / n).sqrt() / width,
                }
            })
            .collect()
    }

    /// CSV with columns `o_low,o_high,count,density,density_se`.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("o_low,o_high,count,density,density_se\n");
        for b in self.histogram() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::report::fmt_f64(b.o_low),
                crate::report::fmt_f64(b.o_high),
                b.count,
                crate::report::fmt_f64(b.density),
                crate::report::fmt_f64(b.density_se)
            ));
        }
        s
    }
}

const CHUNK: u64 = 1 << 14;

/// Runs `n_shots` independent shots. The result depends only on the config.
pub fn ensemble(cfg: &ProtocolConfig) -> Result<EnsembleResult> {
    let sampler = Sampler::new(cfg)?;
    let n_chunks = cfg.n_shots.div_ceil(CHUNK);
    let nb = sampler.support.len();
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; nb];
            let end = ((c + 1) * CHUNK).min(cfg.n_shots);
            for i in c * CHUNK..end {
                if let Shot::Accepted { bin, .. } = sampler.sample_run(&mut shot_rng(cfg.seed, i)) {
                    counts[bin] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; nb],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let accepted: u64 = counts.iter().sum();
    // Moments from integer counts, so the sum order is fixed.
    let moment_estimates = (1..=cfg.max_moment)
        .map(|j| {
            let n = accepted as f64;
            let (mut s1, mut s2) = (0.0, 0.0);
            for (o, &c) in sampler.support.iter().zip(&counts) {
                let v = o.powi(j as i32);
                s1 += c as f64 * v;
                s2 += c as f64 * v * v;
            }
            let mean = s1 / n;
            let var = (s2 / n - mean * mean).max(0.0);
            let std_error = if accepted > 1 { (var / (n - 1.0)).sqrt() } else { f64::NAN };
            MomentSample { j, mean, std_error }
        })
        .collect();
    Ok(EnsembleResult {
        support: sampler.support.clone(),
        cell_width: sampler.cell_width,
        counts,
        accepted,
        total: cfg.n_shots,
        moment_estimates,
    })
}

/// Outcome of per-bin two-sided binomial tests with Bonferroni correction.
#[derive(Debug, Clone, PartialEq)]
pub struct BinTestReport {
    pub bins_tested: usize,
    pub min_p_value: f64,
    pub worst_bin: usize,
    pub corrected_alpha: f64,
    pub passed: bool,
}

/// Two-sided binomial test of every bin count against reference masses.
/// Bins whose expected count is below `min_expected` are pooled into one.
pub fn binomial_bin_test(result: &EnsembleResult, masses: &[f64], alpha: f64, min_expected: f64) -> Result<BinTestReport> {
    if masses.len() != result.counts.len() {
        return Err(Error::DimMismatch { expected: result.counts.len(), got: masses.len() });
    }
    let n = result.accepted;
    let total: f64 = masses.iter().sum();
    let mut cells: Vec<(usize, f64, u64)> = Vec::new();
    let (mut pooled_p, mut pooled_c) = (0.0, 0u64);
    for (k, (&m, &c)) in masses.iter().zip(&result.counts).enumerate() {
        let p = (m / total).max(0.0);
        if p * n as f64 >= min_expected {
            cells.push((k, p, c));
        } else {
            pooled_p += p;
            pooled_c += c;
        }
    }
    if pooled_p > 0.0 || pooled_c > 0 {
        cells.push((usize::MAX, pooled_p, pooled_c));
    }
    let m = cells.len();
    let corrected_alpha = alpha / m as f64;
    let mut min_p = 1.0;
    let mut worst = 0;
    for &(k, p, c) in &cells {
        let pv = if p <= 0.0 {
            if c == 0 { 1.0 } else { 0.0 }
        } else if p >= 1.0 {
            if c == n { 1.0 } else { 0.0 }
        } else {
            let b = Binomial::new(p, n).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let lower = b.cdf(c);
            let upper = if c == 0 { 1.0 } else { b.sf(c - 1) };
            (2.0 * lower.min(upper)).min(1.0)
        };
        if pv < min_p {
            min_p = pv;
            worst = k;
        }
    }
    Ok(BinTestReport { bins_tested: m, min_p_value: min_p, worst_bin: worst, corrected_alpha, passed: min_p >= corrected_alpha })
}
