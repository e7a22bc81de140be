//! Single-point runs (`weak-values`, `pdf`, `charfunc`, `moments`, `mc`)
//! rendered as JSON documents.

use serde_json::{json, Map, Value};

use crate::config::{Command, ReadoutSpec, RunConfig};
use crate::exact::{conditional_charfuncs, conditional_pdf, exact_moment, normalization, MeasurementSetup, ProbeObservable};
use crate::mc::ensemble;
use crate::perturb::{Expander, ZpForm};
use crate::probe::ProbeState;
use crate::report::json_f64;
use crate::weakvalues::{CanonicalWeakValues, WeakValueTable, EPS_ORTH};
use crate::{Complex64, Error, Result};

fn cplx(z: Complex64) -> Value {
    json!([json_f64(z.re), json_f64(z.im)])
}

/// A value or the reason it is unavailable.
fn attempt<T>(r: Result<T>, f: impl FnOnce(T) -> Value) -> Value {
    match r {
        Ok(v) => f(v),
        Err(e) => json!({ "unavailable": e.to_string() }),
    }
}

fn probe_json(p: &ProbeState) -> Value {
    match p {
        ProbeState::Gaussian(g) => json!({
            "kind": "gaussian",
            "q_bar": json_f64(g.q_bar()),
            "delta_q": json_f64(g.delta_q()),
            "delta_p": json_f64(g.delta_p()),
        }),
        ProbeState::Grid(gp) => {
            let g = gp.grid();
            json!({
                "kind": "grid",
                "n": g.len(),
                "center": json_f64(g.q(g.len() / 2)),
                "span": json_f64(g.span()),
                "dq": json_f64(g.dq()),
                "dp": json_f64(g.dp()),
            })
        }
    }
}

fn readout_name(r: &ReadoutSpec) -> &'static str {
    match r {
        ReadoutSpec::P => "p",
        ReadoutSpec::Q => "q",
        ReadoutSpec::Number { .. } => "number",
    }
}

fn weak_values(s: &MeasurementSetup, max_order: u32, eps_orth: f64) -> Result<Value> {
    let table = WeakValueTable::new(s.kernel(), max_order, 0.0, 0.0);
    let alpha: Vec<Vec<Value>> =
        (0..=max_order).map(|j| (0..=max_order).map(|k| cplx(table.get(j, k))).collect()).collect();
    let mut out = Map::new();
    out.insert("alpha0".into(), json_f64(table.alpha0().re));
    out.insert("alpha1".into(), cplx(table.alpha1()));
    out.insert("alpha11".into(), json_f64(table.alpha11().re));
    out.insert("alpha2".into(), cplx(table.alpha2()));
    let canonical = CanonicalWeakValues::from_kernel(s.kernel(), 0.0, 0.0).and_then(|c| {
        if c.alpha0 < eps_orth {
            Err(Error::OrthogonalStates(c.alpha0))
        } else {
            Ok(c)
        }
    });
    match canonical {
        Ok(c) => {
            out.insert("Aw".into(), cplx(c.a_w));
            out.insert("Bw".into(), json_f64(c.b_w));
            out.insert("Cw".into(), cplx(c.c_w));
        }
        Err(e) => {
            out.insert("canonical_unavailable".into(), Value::String(e.to_string()));
        }
    }
    out.insert("alpha".into(), json!(alpha));
    out.insert("normalization_n".into(), json_f64(normalization(s)));
    Ok(Value::Object(out))
}

fn pdf(s: &MeasurementSetup, obs: &ProbeObservable) -> Result<Value> {
    let d = conditional_pdf(s, obs)?;
    Ok(json!({
        "normalization_n": json_f64(d.normalization_n),
        "cell_width": d.cell_width.map(json_f64),
        "total": json_f64(d.total()),
        "support": d.support.iter().map(|&x| json_f64(x)).collect::<Vec<_>>(),
        "pdf": d.pdf.iter().map(|&x| json_f64(x)).collect::<Vec<_>>(),
    }))
}

fn charfunc(cfg: &RunConfig, s: &MeasurementSetup, obs: &ProbeObservable) -> Result<Value> {
    let chis = cfg.chi.clone().unwrap_or_default();
    let exact = conditional_charfuncs(s, obs, &chis)?;
    let e = Expander::with_thresholds(s, cfg.thresholds()?);
    let variant = cfg.variant.variant();
    let rows: Vec<Value> = chis
        .iter()
        .zip(exact)
        .map(|(&chi, z)| {
            let mut row = Map::new();
            row.insert("chi".into(), json_f64(chi));
            row.insert("exact".into(), cplx(z));
            match obs {
                ProbeObservable::PositionQ => {
                    row.insert("expansion".into(), attempt(e.charfunc_q(chi, variant), cplx));
                }
                ProbeObservable::MomentumP => {
                    row.insert("expansion_resummed".into(), attempt(e.charfunc_p(chi, ZpForm::Resummed), cplx));
                    row.insert("expansion_strict".into(), attempt(e.charfunc_p(chi, ZpForm::Strict2nd), cplx));
                }
                ProbeObservable::Matrix(_) => {
                    row.insert("expansion".into(), attempt(e.charfunc_obs(obs, chi), cplx));
                }
            }
            Value::Object(row)
        })
        .collect();
    Ok(json!({ "values": rows }))
}

fn moments(cfg: &RunConfig, s: &MeasurementSetup, obs: &ProbeObservable) -> Result<Value> {
    let e = Expander::with_thresholds(s, cfg.thresholds()?);
    let variant = cfg.variant.variant();
    let gaussian = s.probe().as_gaussian().is_some();
    let mut rows = Vec::new();
    for j in cfg.orders() {
        let exact = exact_moment(s, obs, j)?;
        let expansion = match obs {
            ProbeObservable::MomentumP if gaussian => {
                attempt(e.moment_p_gaussian(j, variant), |m| json_f64(m.value))
            }
            ProbeObservable::MomentumP => attempt(e.moment_p_general(j, variant), |m| json_f64(m.value)),
            _ if j == 1 => attempt(e.expectation_obs(obs, variant), json_f64),
            _ => json!({ "unavailable": "second-order moments of order > 1 are defined for the p readout" }),
        };
        rows.push(json!({ "order": j, "exact": json_f64(exact), "expansion": expansion }));
    }
    let n_star = if matches!(obs, ProbeObservable::MomentumP) { json_f64(e.n_star()) } else { Value::Null };
    Ok(json!({ "n_star": n_star, "values": rows }))
}

fn monte_carlo(cfg: &RunConfig) -> Result<(Value, Option<String>)> {
    let protocol = cfg.protocol()?;
    let r = ensemble(&protocol)?;
    let csv = cfg.mc.as_ref().and_then(|m| m.histogram_csv.as_ref()).map(|_| r.histogram_csv());
    let moments: Vec<Value> = r
        .moment_estimates
        .iter()
        .map(|m| json!({ "order": m.j, "mean": json_f64(m.mean), "std_error": json_f64(m.std_error) }))
        .collect();
    let v = json!({
        "n_shots": r.total,
        "accepted": r.accepted,
        "acceptance_fraction": json_f64(r.acceptance_fraction()),
        "acceptance_se": json_f64(r.acceptance_se()),
        "expected_acceptance": json_f64(protocol.acceptance_probability()),
        "moments": moments,
        "histogram": {
            "support": r.support.iter().map(|&x| json_f64(x)).collect::<Vec<_>>(),
            "cell_width": r.cell_width.map(json_f64),
            "counts": r.counts,
        },
    });
    Ok((v, csv))
}

/// Output of a single-point run: the JSON artifact plus an optional histogram CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleOutput {
    pub document: Value,
    pub histogram_csv: Option<String>,
}

/// Evaluates a non-sweep command and wraps the result with its provenance.
pub fn run_single(cfg: &RunConfig) -> Result<SingleOutput> {
    let s = cfg.setup()?;
    let obs = cfg.readout.observable()?;
    let th = cfg.thresholds()?;
    let mut histogram_csv = None;
    let result = match cfg.command {
        Command::WeakValues => weak_values(&s, cfg.max_order.unwrap_or(2), th.eps_orth)?,
        Command::Pdf => pdf(&s, &obs)?,
        Command::Charfunc => charfunc(cfg, &s, &obs)?,
        Command::Moments => moments(cfg, &s, &obs)?,
        Command::Mc => {
            let (v, csv) = monte_carlo(cfg)?;
            histogram_csv = csv;
            v
        }
        Command::Sweep | Command::Scaling => {
            return Err(Error::Config("θ-sweeps produce CSV; use the sweep runner".into()))
        }
    };
    let config: Value = serde_json::from_str(&cfg.resolved_json()).expect("resolved config is JSON");
    let document = json!({
        "tool": "weakstat",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "provenance": {
            "lambda": json_f64(s.lambda()),
            "variant": cfg.variant,
            "readout": readout_name(&cfg.readout),
            "probe": probe_json(s.probe()),
            "thresholds": { "eps_orth": json_f64(th.eps_orth), "large_shift": json_f64(th.large_shift) },
            "tolerances": { "eps_orth_default": json_f64(EPS_ORTH) },
        },
        "result": result,
    });
    Ok(SingleOutput { document, histogram_csv })
}
