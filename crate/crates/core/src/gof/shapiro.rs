//! Shapiro–Wilk and Shapiro–Francia normality tests, plus the
//! Shapiro–Francia variant for multiply right-censored samples.
//!
//! The SW statistic and p-value follow Royston's algorithm (AS R94), the
//! same path R's `shapiro.test` takes; the SF p-value uses Royston's 1993
//! normal approximation of log(1 − W′).

use crate::error::{Error, Result};
use crate::stats::normal;

use super::TestReport;

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn sorted_checked(values: &[f64], test: &str) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("{test}: non-finite value in sample")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted[sorted.len() - 1] - sorted[0] <= 0.0 {
        return Err(Error::Invalid(format!("{test}: sample has zero variance")));
    }
    Ok(sorted)
}

/// Squared Pearson correlation of two equal-length vectors.
fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (&ai, &bi) in a.iter().zip(b) {
        let da = ai - ma;
        let db = bi - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    (sab * sab) / (saa * sbb)
}

/// Shapiro–Wilk W coefficients (full antisymmetric vector, ascending order).
fn sw_coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    let mut a = vec![0.0; nn2 + 1]; // 1-based half-vector
    if n == 3 {
        a[1] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let an25 = n as f64 + 0.25;
        let mut summ2 = 0.0;
        for (i, ai) in a.iter_mut().enumerate().skip(1) {
            *ai = normal::quantile((i as f64 - 0.375) / an25);
            summ2 += *ai * *ai;
        }
        summ2 *= 2.0;
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / (n as f64).sqrt();
        let a1 = poly(&C1, rsn) - a[1] / ssumm2;
        let (start, fac) = if n > 5 {
            let a2 = -a[2] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * a[1] * a[1] - 2.0 * a[2] * a[2])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[2] = a2;
            (3, fac)
        } else {
            let fac = ((summ2 - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (2, fac)
        };
        a[1] = a1;
        for ai in a.iter_mut().skip(start).take(nn2.saturating_sub(start - 1)) {
            *ai /= -fac;
        }
    }

    // Expand to the full antisymmetric vector: negative for the lower half.
    let mut c = vec![0.0; n];
    for i in 0..n {
        let j = n - 1 - i;
        if i < j {
            c[i] = -a[i + 1];
        } else if i > j {
            c[i] = a[j + 1];
        }
    }
    c
}

/// AS R94 p-value transform for the SW statistic.
fn sw_p_value(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = (0.75f64).sqrt().asin();
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }
    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    let an = n as f64;
    let y = (1.0 - w).ln();
    let (z_num, m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        (-((gamma - y).ln()), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (y, poly(&C5, xx), poly(&C6, xx).exp())
    };
    let z = (z_num - m) / s;
    (1.0 - normal::cdf(z)).clamp(0.0, 1.0)
}

/// Shapiro–Wilk normality test (3 ≤ n ≤ 5000).
pub fn sw_test(values: &[f64]) -> Result<TestReport> {
    let n = values.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::Invalid(format!("Shapiro-Wilk requires 3 <= n <= 5000, got {n}")));
    }
    let sorted = sorted_checked(values, "Shapiro-Wilk")?;
    let coeff = sw_coefficients(n);
    let w = squared_correlation(&coeff, &sorted);
    Ok(TestReport::new("Z-SW", w, sw_p_value(w, n)))
}

/// Royston's 1993 normal approximation for the SF p-value; `m` is the
/// effective sample size.
fn sf_p_value(w_prime: f64, m: usize) -> f64 {
    if w_prime >= 1.0 {
        return 1.0;
    }
    let u = (m as f64).ln();
    let v = u.ln();
    let mu = -1.2725 + 1.0521 * (v - u);
    let sig = 1.0308 - 0.26758 * (v + 2.0 / u);
    let z = ((1.0 - w_prime).ln() - mu) / sig;
    (1.0 - normal::cdf(z)).clamp(0.0, 1.0)
}

/// Blom plotting positions (i − 0.375)/(n + 0.25), as normal scores.
fn blom_scores(n: usize) -> Vec<f64> {
    (1..=n).map(|i| normal::quantile((i as f64 - 0.375) / (n as f64 + 0.25))).collect()
}

/// Shapiro–Francia normality test: squared correlation between the ordered
/// sample and expected normal scores.
pub fn sf_test(values: &[f64]) -> Result<TestReport> {
    let n = values.len();
    if !(5..=5000).contains(&n) {
        return Err(Error::Invalid(format!("Shapiro-Francia requires 5 <= n <= 5000, got {n}")));
    }
    let sorted = sorted_checked(values, "Shapiro-Francia")?;
    let scores = blom_scores(n);
    let w_prime = squared_correlation(&scores, &sorted);
    Ok(TestReport::new("Z-SF", w_prime, sf_p_value(w_prime, n)))
}

/// Shapiro–Francia test for multiply right-censored samples.
///
/// Uncensored order statistics are paired with normal scores at
/// Michael–Schucany Kaplan–Meier-based plotting positions (offset 0.375,
/// which reduces to the Blom positions when nothing is censored); the
/// p-value uses the Royston approximation with the uncensored count.
pub fn sf_test_censored(values: &[f64], status: &[bool]) -> Result<TestReport> {
    let n = values.len();
    if status.len() != n {
        return Err(Error::Invalid("values/status length mismatch".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("censored SF: non-finite value in sample".into()));
    }
    let m = status.iter().filter(|&&s| s).count();
    if m < 5 {
        return Err(Error::Invalid(format!(
            "censored SF requires at least 5 uncensored values, got {m}"
        )));
    }

    // Ascending by value; events precede censorings at ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(status[b].cmp(&status[a])));

    const A: f64 = 0.375;
    let nf = n as f64;
    let lead = (nf - A + 1.0) / (nf - 2.0 * A + 1.0);
    let mut prod = 1.0;
    let mut xs = Vec::with_capacity(m);
    let mut scores = Vec::with_capacity(m);
    for (rank0, &idx) in order.iter().enumerate() {
        let j = (rank0 + 1) as f64;
        if status[idx] {
            prod *= (nf - j - A + 1.0) / (nf - j - A + 2.0);
            let p = 1.0 - lead * prod;
            xs.push(values[idx]);
            scores.push(normal::quantile(p));
        }
    }
    if xs[m - 1] - xs[0] <= 0.0 {
        return Err(Error::Invalid("censored SF: uncensored values have zero variance".into()));
    }
    let w_prime = squared_correlation(&scores, &xs);
    Ok(TestReport::new("CZ-CSF", w_prime, sf_p_value(w_prime, m)))
}
