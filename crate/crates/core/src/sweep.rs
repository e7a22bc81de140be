//! θ-sweeps of the qubit example: exact curves next to the second-order
//! variants, one row per angle.

use rayon::prelude::*;

use crate::config::{Command, RunConfig, SweepQuantity};
use crate::exact::ProbeObservable;
use crate::perturb::{Expander, ExpansionVariant, Thresholds};
use crate::report::{Cell, Table};
use crate::spinhalf::{spin_exact_moment, spin_interp_moment, spin_scaled_moment, universal_scaling, SpinSetup};
use crate::Result;

const VARIANTS: [ExpansionVariant; 3] =
    [ExpansionVariant::Full2ndOrder, ExpansionVariant::Interpolating, ExpansionVariant::ABOnly];

/// `⟨p⟩_f` exact and for each variant: `[exact, full, interp, ab]`.
pub fn mean_row(s: &SpinSetup, th: Thresholds) -> Result<[Cell; 4]> {
    let exact = spin_exact_moment(s, 1)?;
    let m = s.to_measurement_setup()?;
    let e = Expander::with_thresholds(&m, th);
    let v = VARIANTS.map(|v| Cell::from(e.expectation_obs(&ProbeObservable::MomentumP, v)));
    Ok([Cell::Num(exact), v[0], v[1], v[2]])
}

/// `(⟨p^j⟩_f - overline{p^j}) / overline{p^j}` exact and for each variant.
pub fn moment_row(s: &SpinSetup, j: u32, th: Thresholds) -> Result<[Cell; 4]> {
    let pj = s.probe().p_moment(j);
    let rel = |x: f64| if pj != 0.0 { (x - pj) / pj } else { x };
    let exact = rel(spin_exact_moment(s, j)?);
    let m = s.to_measurement_setup()?;
    let e = Expander::with_thresholds(&m, th);
    let v = VARIANTS.map(|v| Cell::from(e.moment_p_gaussian(j, v).map(|r| rel(r.value))));
    Ok([Cell::Num(exact), v[0], v[1], v[2]])
}

/// Scaled even moment: `[exact, universal, interpolated]`.
pub fn scaling_row(s: &SpinSetup, j: u32) -> Result<[Cell; 3]> {
    let exact = spin_scaled_moment(s, j)?;
    let uni = universal_scaling(s, j)?;
    let pj = s.probe().p_moment(j);
    let interp = spin_interp_moment(s, j).map(|m| (m - pj) / (f64::from(j) * pj));
    Ok([Cell::Num(exact), Cell::Num(uni), Cell::from(interp)])
}

/// The θ-sweep table requested by a `sweep` or `scaling` config.
pub fn run_sweep(cfg: &RunConfig) -> Result<Table> {
    let thetas = cfg
        .theta
        .as_ref()
        .ok_or_else(|| crate::Error::Config("`theta` is required".into()))?
        .values()?;
    let th = cfg.thresholds()?;
    let orders = cfg.orders();
    let setups = thetas.iter().map(|&t| cfg.spin_at(t)).collect::<Result<Vec<_>>>()?;
    let with_theta = |t: f64, j: Option<u32>, cells: &[Cell]| {
        let mut row = vec![Cell::Num(t)];
        if let Some(j) = j {
            row.push(Cell::Int(i64::from(j)));
        }
        row.extend_from_slice(cells);
        row
    };
    let rows: Vec<Vec<Vec<Cell>>> = match (cfg.command, cfg.quantity.unwrap_or(SweepQuantity::Mean)) {
        (Command::Scaling, _) => setups
            .par_iter()
            .zip(&thetas)
            .map(|(s, &t)| orders.iter().map(|&j| Ok(with_theta(t, Some(j), &scaling_row(s, j)?))).collect())
            .collect::<Result<_>>()?,
        (_, SweepQuantity::Mean) => setups
            .par_iter()
            .zip(&thetas)
            .map(|(s, &t)| Ok(vec![with_theta(t, None, &mean_row(s, th)?)]))
            .collect::<Result<_>>()?,
        (_, SweepQuantity::Moment) => setups
            .par_iter()
            .zip(&thetas)
            .map(|(s, &t)| orders.iter().map(|&j| Ok(with_theta(t, Some(j), &moment_row(s, j, th)?))).collect())
            .collect::<Result<_>>()?,
    };
    let mut table = match (cfg.command, cfg.quantity.unwrap_or(SweepQuantity::Mean)) {
        (Command::Scaling, _) => Table::new(["theta", "order", "exact", "universal", "interp"]),
        (_, SweepQuantity::Mean) => Table::new(["theta", "exact", "interp_full", "interp", "interp_AB"]),
        (_, SweepQuantity::Moment) => Table::new(["theta", "order", "exact", "interp_full", "interp", "interp_AB"]),
    };
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::GaussianProbe;
    use std::f64::consts::PI;

    fn cfg(extra: &str, command: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"command": "{command}",
                "system": {{"kind": "spin", "n_i": [0, 0, 1], "n": [1, 0, 0]}},
                "probe": {{"kind": "gaussian", "delta_q": 1.0}},
                "lambda_over_dp": 0.1,
                "theta": {{"start": 0, "stop": 3.141592653589793, "count": 9}}{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn mean_sweep_layout_and_orthogonal_row() {
        let t = run_sweep(&cfg("", "sweep")).unwrap();
        assert_eq!(t.header, ["theta", "exact", "interp_full", "interp", "interp_AB"]);
        assert_eq!(t.rows.len(), 9);
        let last = &t.rows[8];
        assert_eq!(last[4], "");
        assert!(last[1].parse::<f64>().unwrap().abs() < 1e-12);
    }

    #[test]
    fn moment_sweep_has_one_row_per_order() {
        let t = run_sweep(&cfg(r#", "quantity": "moment", "orders": [2, 4]"#, "sweep")).unwrap();
        assert_eq!(t.rows.len(), 18);
        assert_eq!(t.rows[1][1], "4");
    }

    #[test]
    fn scaling_rows() {
        let t = run_sweep(&cfg(r#", "orders": [2, 400]"#, "scaling")).unwrap();
        assert_eq!(t.header, ["theta", "order", "exact", "universal", "interp"]);
        // j = 400 exceeds n* = 100.
        assert_eq!(t.rows[1][4], "");
        let plateau: f64 = t.rows[16][3].parse().unwrap();
        assert!((plateau - 1.0).abs() < 0.01);
    }

    #[test]
    fn mean_row_matches_direct_evaluation() {
        let s = SpinSetup::coplanar(2.0, 0.05, GaussianProbe::pure(0.0, 1.0).unwrap());
        let r = mean_row(&s, Thresholds::default()).unwrap();
        assert_eq!(r[0], Cell::Num(spin_exact_moment(&s, 1).unwrap()));
        let r = mean_row(&SpinSetup::coplanar(PI, 0.05, GaussianProbe::pure(0.0, 1.0).unwrap()), Thresholds::default())
            .unwrap();
        assert_eq!(r[3], Cell::Missing);
    }
}
