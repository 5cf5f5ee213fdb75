//! One-sample Kolmogorov–Smirnov tests with fully specified reference
//! distributions (standard normal or Uniform(0,1)); p-values from the
//! asymptotic Kolmogorov series.

use crate::error::{Error, Result};
use crate::stats::{kolmogorov, normal};

use super::TestReport;

fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Invalid("KS test needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("KS test: non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(d)
}

fn report(name: &str, d: f64, n: usize) -> TestReport {
    let p = kolmogorov::survival((n as f64).sqrt() * d);
    TestReport::new(name, d, p)
}

/// KS test against the standard normal with fixed parameters.
pub fn ks_test_normal(values: &[f64]) -> Result<TestReport> {
    let d = ks_statistic(values, normal::cdf)?;
    Ok(report("Z-KS", d, values.len()))
}

/// KS test against Uniform(0,1).
pub fn ks_test_uniform(values: &[f64]) -> Result<TestReport> {
    if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Invalid("uniform KS test: values must lie in [0,1]".into()));
    }
    let d = ks_statistic(values, |x| x.clamp(0.0, 1.0))?;
    Ok(report("U-KS", d, values.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_grid_gives_exact_d() {
        // x_i = Φ⁻¹((i − 0.5)/n): the empirical CDF brackets Φ symmetrically
        // and the sup gap is exactly 0.5/n.
        let n = 10;
        let vals: Vec<f64> =
            (1..=n).map(|i| normal::quantile((i as f64 - 0.5) / n as f64)).collect();
        let r = ks_test_normal(&vals).unwrap();
        assert!((r.statistic - 0.05).abs() < 1e-9, "D={}", r.statistic);
    }

    #[test]
    fn single_zero_has_d_half() {
        let r = ks_test_normal(&[0.0]).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_small_d() {
        let vals: Vec<f64> = (1..=100).map(|i| (i as f64 - 0.5) / 100.0).collect();
        let r = ks_test_uniform(&vals).unwrap();
        assert!((r.statistic - 0.005).abs() < 1e-12);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn empty_input_is_error() {
        assert!(ks_test_normal(&[]).is_err());
    }
}
