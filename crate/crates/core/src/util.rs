use num_complex::Complex64;

/// Binomial coefficient as a float (exact for the small arguments used here).
pub fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c
}

/// ln C(n, k) via log-gamma.
pub fn ln_binom(n: u32, k: u32) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0)
}

/// E[Z^m] for a standard normal Z.
pub fn normal_moment(m: u32) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    (1..m).step_by(2).map(f64::from).product()
}

/// ln((m-1)!!) for even m, accumulated term by term.
pub fn ln_normal_moment(m: u32) -> f64 {
    debug_assert!(m.is_multiple_of(2));
    (1..m).step_by(2).map(|k| f64::from(k).ln()).sum()
}

/// E[(μ + σZ)^n] for complex μ.
pub fn shifted_normal_moment(mu: Complex64, sigma: f64, n: u32) -> Complex64 {
    (0..=n)
        .step_by(2)
        .map(|m| mu.powu(n - m) * (binom(n, m) * sigma.powi(m as i32) * normal_moment(m)))
        .sum()
}

/// Numerically stable ln Σ exp(x).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binom(4, 2), 6.0);
        assert_eq!(binom(10, 0), 1.0);
        assert_eq!(binom(3, 5), 0.0);
        assert!((ln_binom(400, 200) - binom(400, 200).ln()).abs() < 1e-9);
    }

    #[test]
    fn normal_moments() {
        assert_eq!(normal_moment(4), 3.0);
        assert_eq!(normal_moment(6), 15.0);
        assert!((ln_normal_moment(8) - 105f64.ln()).abs() < 1e-14);
        let m = shifted_normal_moment(Complex64::new(1.0, 0.0), 2.0, 2);
        assert!((m.re - 5.0).abs() < 1e-14);
    }

    #[test]
    fn lse() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - 1000.0 - 2f64.ln()).abs() < 1e-12);
    }
}
