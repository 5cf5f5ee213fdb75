//! Asymptotic Kolmogorov distribution.

use std::f64::consts::PI;

/// Upper-tail probability Q(λ) = P(K > λ) of the Kolmogorov distribution.
///
/// Uses the Jacobi theta form for small λ and the alternating series
/// otherwise; both converge to well below 1e-10 in their regimes.
pub fn survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let t = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let cdf = (2.0 * PI).sqrt() / lambda
            * (t + t.powi(9) + t.powi(25) + t.powi(49) + t.powi(81));
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}
