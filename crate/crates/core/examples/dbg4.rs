use std::f64::consts::PI;
use weakstat::exact::{exact_moment, ProbeObservable};
use weakstat::probe::GaussianProbe;
use weakstat::spinhalf::SpinSetup;
fn main() {
    for q_bar in [0.0, 1.0] {
        let g = GaussianProbe::new(q_bar, 1.0, 0.5).unwrap();
        for ratio in [0.1, 0.5] {
            let lambda = ratio * g.coherence_scale();
            for n in [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0]] {
                let s = SpinSetup::new([0.,0.,1.],[PI.sin(),0.,PI.cos()], n, lambda, g).unwrap();
                let m = s.to_measurement_setup().unwrap();
                let gp = m.grid_probe().unwrap();
                let mg = m.with_probe(gp);
                for j in [5u32,7] {
                    let a = exact_moment(&m,&ProbeObservable::MomentumP,j).unwrap();
                    let b = exact_moment(&mg,&ProbeObservable::MomentumP,j).unwrap();
                    println!("qb={q_bar} r={ratio} n={n:?} j={j} gauss={a:.3e} grid={b:.3e} λ^j={:.3e}", lambda.powi(j as i32));
                }
            }
        }
    }
}
