//! JSON run configurations: parsing with field diagnostics, validation and
//! construction of the physical setup.

use serde::{Deserialize, Serialize};

use crate::exact::{GridOperator, MeasurementSetup, ProbeObservable};
use crate::hilbert::{spectral_decompose, validate_density, SystemObservable, MAX_DIM};
use crate::perturb::{ExpansionVariant, Thresholds};
use crate::probe::{GaussianProbe, GridProbe, ProbeState, UniformGrid};
use crate::spinhalf::SpinSetup;
use crate::{CMatrix, Complex64, Error, Result};

/// Largest readout grid accepted for matrix observables (dense eigensolve).
pub const MAX_OPERATOR_GRID: usize = 1024;
/// Largest θ grid.
pub const MAX_THETA_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    WeakValues,
    Pdf,
    Charfunc,
    Moments,
    Sweep,
    Scaling,
    Mc,
}

/// Second-order variant names used on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Full2,
    Interp,
    Ab,
}

impl VariantName {
    pub fn variant(self) -> ExpansionVariant {
        match self {
            VariantName::Full2 => ExpansionVariant::Full2ndOrder,
            VariantName::Interp => ExpansionVariant::Interpolating,
            VariantName::Ab => ExpansionVariant::ABOnly,
        }
    }
}

impl std::str::FromStr for VariantName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full2" => Ok(Self::Full2),
            "interp" => Ok(Self::Interp),
            "ab" => Ok(Self::Ab),
            _ => Err(Error::Config(format!("unknown variant `{s}` (expected full2, interp or ab)"))),
        }
    }
}

/// Complex matrix in JSON: real rows, rows of `[re, im]` pairs, or `{re, im}` parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixJson {
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<[f64; 2]>>),
    Parts { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
}

fn square_dim(rows: usize, cols: impl Iterator<Item = usize>) -> Result<usize> {
    if rows == 0 || rows > MAX_DIM {
        return Err(Error::DimensionTooLarge(rows));
    }
    for c in cols {
        if c != rows {
            return Err(Error::NotSquare { rows, cols: c });
        }
    }
    Ok(rows)
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let m = match self {
            MatrixJson::Real(r) => {
                let d = square_dim(r.len(), r.iter().map(Vec::len))?;
                CMatrix::from_fn(d, d, |i, j| Complex64::new(r[i][j], 0.0))
            }
            MatrixJson::Complex(r) => {
                let d = square_dim(r.len(), r.iter().map(Vec::len))?;
                CMatrix::from_fn(d, d, |i, j| Complex64::new(r[i][j][0], r[i][j][1]))
            }
            MatrixJson::Parts { re, im } => {
                let d = square_dim(re.len(), re.iter().map(Vec::len))?;
                if im.len() != d {
                    return Err(Error::DimMismatch { expected: d, got: im.len() });
                }
                square_dim(im.len(), im.iter().map(Vec::len))?;
                CMatrix::from_fn(d, d, |i, j| Complex64::new(re[i][j], im[i][j]))
            }
        };
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        Ok(m)
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        MatrixJson::Complex(rows)
    }
}

/// Decodes a standalone matrix JSON document.
pub fn parse_matrix_json(text: &str) -> Result<CMatrix> {
    let m: MatrixJson = parse_with_path(text)?;
    m.to_matrix()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// Qubit with Bloch vectors; `n_f` may be omitted for θ-sweeps.
    Spin {
        n_i: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_f: Option<[f64; 3]>,
        n: [f64; 3],
    },
    Matrix { rho_i: MatrixJson, rho_f: MatrixJson, observable: MatrixJson },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default)]
    pub center: f64,
    pub span: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<UniformGrid> {
        UniformGrid::new(self.n, self.center, self.span)
    }
}

struct GaussianSpec {
    q_bar: f64,
    delta_q: f64,
    delta_p: Option<f64>,
}

impl GaussianSpec {
    fn probe(&self) -> Result<GaussianProbe> {
        match self.delta_p {
            Some(dp) => GaussianProbe::new(self.q_bar, self.delta_q, dp),
            None => GaussianProbe::pure(self.q_bar, self.delta_q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    #[serde(default)]
    pub q_bar: f64,
    pub delta_q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSpec {
    Gaussian {
        #[serde(default)]
        q_bar: f64,
        delta_q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_p: Option<f64>,
    },
    Mixture { components: Vec<MixtureComponent>, grid: GridSpec },
}

impl ProbeSpec {
    pub fn probe(&self) -> Result<ProbeState> {
        match self {
            ProbeSpec::Gaussian { q_bar, delta_q, delta_p } => {
                Ok(GaussianSpec { q_bar: *q_bar, delta_q: *delta_q, delta_p: *delta_p }.probe()?.into())
            }
            ProbeSpec::Mixture { components, grid } => {
                let comps = components
                    .iter()
                    .map(|c| {
                        let g = GaussianSpec { q_bar: c.q_bar, delta_q: c.delta_q, delta_p: c.delta_p };
                        Ok((c.weight, g.probe()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(GridProbe::mixture(&comps, grid.grid()?)?.into())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReadoutSpec {
    P,
    Q,
    /// Oscillator number operator centered at `center` with width `sigma`.
    Number { grid: GridSpec, center: f64, sigma: f64 },
}

impl ReadoutSpec {
    pub fn observable(&self) -> Result<ProbeObservable> {
        match self {
            ReadoutSpec::P => Ok(ProbeObservable::MomentumP),
            ReadoutSpec::Q => Ok(ProbeObservable::PositionQ),
            ReadoutSpec::Number { grid, center, sigma } => {
                Ok(GridOperator::number_operator(grid.grid()?, *center, *sigma)?.into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaGrid {
    Range { start: f64, stop: f64, count: usize },
    Values { values: Vec<f64> },
}

impl ThetaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            ThetaGrid::Range { start, stop, count } => {
                if *count > MAX_THETA_POINTS {
                    return Err(Error::Config(format!("theta.count {count} > {MAX_THETA_POINTS}")));
                }
                match *count {
                    0 => Vec::new(),
                    1 => vec![*start],
                    n => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
                }
            }
            ThetaGrid::Values { values } => values.clone(),
        };
        if v.is_empty() {
            return Err(Error::Config("theta grid is empty".into()));
        }
        if v.len() > MAX_THETA_POINTS {
            return Err(Error::Config(format!("theta grid has {} > {MAX_THETA_POINTS} points", v.len())));
        }
        if v.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("theta grid has non-finite values".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    /// `⟨p⟩_f`.
    Mean,
    /// `(⟨p^j⟩_f - overline{p^j}) / overline{p^j}` for each order.
    Moment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_orth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub large_shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub n_shots: u64,
    #[serde(default)]
    pub seed: u64,
    /// Observable measured for post-selection; defaults to `ρ_f` itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postselect: Option<MatrixJson>,
    /// Acceptance probability per distinct eigenvalue of `postselect` (ascending).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_moment: Option<u32>,
    /// Optional path for the histogram CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_csv: Option<String>,
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub system: SystemSpec,
    pub probe: ProbeSpec,
    /// Coupling `λ`; alternatively give `lambda_over_dp` relative to the coherence scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_over_dp: Option<f64>,
    #[serde(default = "default_readout")]
    pub readout: ReadoutSpec,
    #[serde(default = "default_variant")]
    pub variant: VariantName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<SweepQuantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_readout() -> ReadoutSpec {
    ReadoutSpec::P
}

fn default_variant() -> VariantName {
    VariantName::Full2
}

fn parse_with_path<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m);
        Error::Config(format!("line {} column {}: at `{path}`: {msg}", inner.line(), inner.column()))
    })?;
    de.end().map_err(|e| Error::Config(format!("line {} column {}: trailing data", e.line(), e.column())))?;
    Ok(value)
}

fn cfg_err(field: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{field}: {m}")),
        other => Error::Config(format!("{field}: {other}")),
    }
}

fn need<'a, T>(v: &'a Option<T>, field: &str, cmd: Command) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("`{field}` is required for command {cmd:?}")))
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = parse_with_path(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical JSON of the resolved configuration (output path removed).
    pub fn resolved_json(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        if let Some(mc) = &mut c.mc {
            mc.histogram_csv = None;
        }
        serde_json::to_string(&c).expect("serializable")
    }

    /// Checks every physical parameter and command requirement.
    pub fn validate(&self) -> Result<()> {
        self.lambda()?;
        self.probe_state()?;
        self.readout.observable().map_err(|e| cfg_err("readout", e))?;
        if let ReadoutSpec::Number { grid, .. } = self.readout {
            if grid.n > MAX_OPERATOR_GRID {
                return Err(Error::Config(format!("readout.grid.n {} > {MAX_OPERATOR_GRID}", grid.n)));
            }
        }
        self.thresholds()?;
        let cmd = self.command;
        match cmd {
            Command::Sweep | Command::Scaling => {
                if !matches!(self.system, SystemSpec::Spin { .. }) {
                    return Err(Error::Config("θ-sweeps need a spin system".into()));
                }
                if !matches!(self.probe, ProbeSpec::Gaussian { .. }) {
                    return Err(Error::Config("θ-sweeps need a Gaussian probe".into()));
                }
                if self.readout != ReadoutSpec::P {
                    return Err(Error::Config("θ-sweeps read out p".into()));
                }
                need(&self.theta, "theta", cmd)?.values()?;
                self.spin_at(0.0)?;
                let orders = self.orders_or(&[])?;
                if cmd == Command::Scaling || self.quantity == Some(SweepQuantity::Moment) {
                    if orders.is_empty() {
                        return Err(Error::Config("`orders` must be non-empty".into()));
                    }
                    if cmd == Command::Scaling && orders.iter().any(|j| *j == 0 || j % 2 == 1) {
                        return Err(Error::Config("scaling orders must be positive and even".into()));
                    }
                    if orders.iter().any(|j| *j > crate::spinhalf::MAX_MOMENT_ORDER) {
                        return Err(Error::Config(format!("orders above {}", crate::spinhalf::MAX_MOMENT_ORDER)));
                    }
                }
            }
            _ => {
                self.setup()?;
            }
        }
        match cmd {
            Command::Charfunc => {
                let chi = need(&self.chi, "chi", cmd)?;
                if chi.is_empty() || chi.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("`chi` must be a non-empty list of finite values".into()));
                }
            }
            Command::Moments => {
                let orders = self.orders_or(&[1, 2, 3, 4])?;
                if orders.iter().any(|j| *j > crate::probe::MAX_QUASI_ORDER) {
                    return Err(Error::Config(format!("moment orders above {}", crate::probe::MAX_QUASI_ORDER)));
                }
            }
            Command::WeakValues => {
                if self.max_order.unwrap_or(2) > 8 {
                    return Err(Error::Config("max_order above 8".into()));
                }
            }
            Command::Mc => {
                let mc = need(&self.mc, "mc", cmd)?;
                if mc.n_shots == 0 || mc.n_shots > 1_000_000_000 {
                    return Err(Error::Config("mc.n_shots must be in 1..=1e9".into()));
                }
                if mc.max_moment.unwrap_or(4) > 16 {
                    return Err(Error::Config("mc.max_moment above 16".into()));
                }
                self.protocol().map_err(|e| cfg_err("mc", e))?;
            }
            _ => {}
        }
        Ok(())
    }

    fn orders_or(&self, default: &[u32]) -> Result<Vec<u32>> {
        let o = self.orders.clone().unwrap_or_else(|| default.to_vec());
        if o.len() > 64 {
            return Err(Error::Config("at most 64 orders".into()));
        }
        Ok(o)
    }

    pub fn orders(&self) -> Vec<u32> {
        let default: &[u32] = match self.command {
            Command::Moments => &[1, 2, 3, 4],
            _ => &[],
        };
        self.orders.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        let mut th = Thresholds::default();
        if let Some(t) = &self.thresholds {
            if let Some(e) = t.eps_orth {
                if !(e.is_finite() && e > 0.0) {
                    return Err(Error::Config(format!("thresholds.eps_orth = {e} must be positive")));
                }
                th.eps_orth = e;
            }
            if let Some(l) = t.large_shift {
                if !(l.is_finite() && l > 0.0) {
                    return Err(Error::Config(format!("thresholds.large_shift = {l} must be positive")));
                }
                th.large_shift = l;
            }
        }
        Ok(th)
    }

    pub fn probe_state(&self) -> Result<ProbeState> {
        self.probe.probe().map_err(|e| cfg_err("probe", e))
    }

    /// Coherence scale `δp` of the probe (`1/(2ΔQ)` for the Gaussian, `1/(2 q-spread)` otherwise).
    fn coherence_scale(&self) -> Result<f64> {
        Ok(match self.probe_state()? {
            ProbeState::Gaussian(g) => g.coherence_scale(),
            p => 0.5 / p.q_spread(),
        })
    }

    pub fn lambda(&self) -> Result<f64> {
        let l = match (self.lambda, self.lambda_over_dp) {
            (Some(l), None) => l,
            (None, Some(r)) => r * self.coherence_scale()?,
            _ => return Err(Error::Config("give exactly one of `lambda` and `lambda_over_dp`".into())),
        };
        if !l.is_finite() {
            return Err(Error::Config(format!("lambda = {l} is not finite")));
        }
        Ok(l)
    }

    /// Spin setup with the post-selection polarization rotated to angle `θ`
    /// from `n_i`, in the plane spanned by `n_i` and `n`.
    pub fn spin_at(&self, theta: f64) -> Result<SpinSetup> {
        let SystemSpec::Spin { n_i, n_f, n } = &self.system else {
            return Err(Error::Config("spin system required".into()));
        };
        let g = *self.probe_state()?.as_gaussian().ok_or_else(|| Error::Config("Gaussian probe required".into()))?;
        let r_f = n_f.map_or(1.0, |v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        let ni_norm = (n_i[0] * n_i[0] + n_i[1] * n_i[1] + n_i[2] * n_i[2]).sqrt();
        if ni_norm == 0.0 {
            return Err(Error::Config("θ-sweeps need a polarized preselection".into()));
        }
        let e1 = n_i.map(|x| x / ni_norm);
        let along = n[0] * e1[0] + n[1] * e1[1] + n[2] * e1[2];
        let mut perp = [n[0] - along * e1[0], n[1] - along * e1[1], n[2] - along * e1[2]];
        let pn = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
        if pn < 1e-12 {
            // n parallel to n_i: any orthogonal direction.
            perp = if e1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let d = perp[0] * e1[0] + perp[1] * e1[1] + perp[2] * e1[2];
            perp = [perp[0] - d * e1[0], perp[1] - d * e1[1], perp[2] - d * e1[2]];
        }
        let pn = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
        let e2 = perp.map(|x| x / pn);
        let (s, c) = theta.sin_cos();
        let nf = [0, 1, 2].map(|k| r_f * (c * e1[k] + s * e2[k]));
        SpinSetup::new(*n_i, nf, *n, self.lambda()?, g).map_err(|e| cfg_err("system", e))
    }

    fn system_matrices(&self) -> Result<(CMatrix, CMatrix, CMatrix)> {
        match &self.system {
            SystemSpec::Spin { n_i, n_f, n } => {
                let nf = n_f.ok_or_else(|| Error::Config("system.n_f is required for this command".into()))?;
                let g = GaussianProbe::pure(0.0, 1.0)?;
                let s = SpinSetup::new(*n_i, nf, *n, 0.0, g).map_err(|e| cfg_err("system", e))?;
                let m = s.to_measurement_setup().map_err(|e| cfg_err("system", e))?;
                Ok((m.rho_i().matrix().clone(), m.rho_f().matrix().clone(), s.observable_matrix()))
            }
            SystemSpec::Matrix { rho_i, rho_f, observable } => Ok((
                rho_i.to_matrix().map_err(|e| cfg_err("system.rho_i", e))?,
                rho_f.to_matrix().map_err(|e| cfg_err("system.rho_f", e))?,
                observable.to_matrix().map_err(|e| cfg_err("system.observable", e))?,
            )),
        }
    }

    pub fn system_observable(&self) -> Result<SystemObservable> {
        spectral_decompose(&self.system_matrices()?.2).map_err(|e| cfg_err("system.observable", e))
    }

    /// The measurement setup described by this config.
    pub fn setup(&self) -> Result<MeasurementSetup> {
        let (ri, rf, a) = self.system_matrices()?;
        let d = ri.nrows();
        for (name, m) in [("rho_f", &rf), ("observable", &a)] {
            if m.nrows() != d {
                return Err(Error::Config(format!("system.{name}: dimension {} differs from rho_i ({d})", m.nrows())));
            }
        }
        MeasurementSetup::new(
            self.lambda()?,
            validate_density(&ri).map_err(|e| cfg_err("system.rho_i", e))?,
            validate_density(&rf).map_err(|e| cfg_err("system.rho_f", e))?,
            spectral_decompose(&a).map_err(|e| cfg_err("system.observable", e))?,
            self.probe_state()?,
        )
        .map_err(|e| cfg_err("system", e))
    }

    /// Monte Carlo protocol for the `mc` command.
    pub fn protocol(&self) -> Result<crate::mc::ProtocolConfig> {
        let mc = self.mc.as_ref().ok_or_else(|| Error::Config("`mc` block missing".into()))?;
        let setup = self.setup()?;
        let obs = self.readout.observable()?;
        let mut cfg = match (&mc.postselect, &mc.w) {
            (None, None) => crate::mc::ProtocolConfig::from_setup(&setup, obs, mc.n_shots, mc.seed)?,
            (Some(m), Some(w)) => {
                let sf = spectral_decompose(&m.to_matrix()?)?;
                crate::mc::ProtocolConfig::new(&setup, obs, &sf, w, mc.n_shots, mc.seed)?
            }
            _ => return Err(Error::Config("mc.postselect and mc.w go together".into())),
        };
        cfg.max_moment = mc.max_moment.unwrap_or(4);
        Ok(cfg)
    }
}
