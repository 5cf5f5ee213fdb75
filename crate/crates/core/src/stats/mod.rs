//! Shared numerical special functions.

pub mod kolmogorov;
pub mod normal;

/// Upper-tail probability of the F distribution with (d1, d2) degrees of
/// freedom, via the regularized incomplete beta function.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let x = d2 / (d2 + d1 * f);
    statrs::function::beta::beta_reg(d2 / 2.0, d1 / 2.0, x)
}
