//! Profile marginal log-likelihood for the gamma frailty model.
//!
//! Conditional on frailty z, cluster i contributes
//! `z^{D_i} · Π_j [h₀(y_ij) e^{x_ij β}]^{δ_ij} · exp(−z A_i)` with
//! `A_i = Σ_j e^{x_ij β} H₀(y_ij)`. Integrating z over Gamma(1/θ, θ) gives
//! the closed form
//! `Γ(1/θ + D_i)/Γ(1/θ) · θ^{D_i} · (1 + θ A_i)^{−(1/θ + D_i)}`,
//! which this module evaluates with the Breslow baseline profiled in at the
//! penalized-likelihood solution.

use statrs::function::gamma::ln_gamma;

/// Per-cluster event counts D_i and cumulative-hazard sums A_i.
pub(crate) struct ClusterSums {
    pub d: Vec<f64>,
    pub a: Vec<f64>,
}

pub(crate) fn cluster_sums(
    g: usize,
    cluster: &[usize],
    event: &[bool],
    exp_xbeta: &[f64],
    chf_at_record: &[f64],
) -> ClusterSums {
    let mut d = vec![0.0; g];
    let mut a = vec![0.0; g];
    for i in 0..cluster.len() {
        if event[i] {
            d[cluster[i]] += 1.0;
        }
        a[cluster[i]] += exp_xbeta[i] * chf_at_record[i];
    }
    ClusterSums { d, a }
}

/// Log of the gamma-integrated frailty factor for one cluster.
pub(crate) fn log_cluster_factor(d: f64, a: f64, theta: f64) -> f64 {
    let inv = 1.0 / theta;
    ln_gamma(inv + d) - ln_gamma(inv) + d * theta.ln() - (inv + d) * (theta * a).ln_1p()
}

/// Marginal log-likelihood with frailties integrated out:
/// `Σ_v d_v ln h_v + Σ_events x_ij β + Σ_i log-factor_i`.
pub(crate) fn marginal_loglik_frailty(
    increments: &[(f64, f64)],
    tied_event_counts: &[f64],
    xbeta_event_sum: f64,
    sums: &ClusterSums,
    theta: f64,
) -> f64 {
    let mut ll = xbeta_event_sum;
    for ((_, h), d) in increments.iter().zip(tied_event_counts) {
        ll += d * h.ln();
    }
    for (d, a) in sums.d.iter().zip(&sums.a) {
        ll += log_cluster_factor(*d, *a, theta);
    }
    ll
}

/// Marginal (full) log-likelihood without frailty, Breslow baseline plugged in.
pub(crate) fn marginal_loglik_no_frailty(
    increments: &[(f64, f64)],
    tied_event_counts: &[f64],
    xbeta_event_sum: f64,
    exp_xbeta: &[f64],
    chf_at_record: &[f64],
) -> f64 {
    let mut ll = xbeta_event_sum;
    for ((_, h), d) in increments.iter().zip(tied_event_counts) {
        ll += d * h.ln();
    }
    for (w, chf) in exp_xbeta.iter().zip(chf_at_record) {
        ll -= w * chf;
    }
    ll
}

/// Golden-section maximization of `f` over `[a, b]`; returns (argmax, max,
/// evaluation count). `f` is evaluated O(log((b−a)/tol)) times.
pub(crate) fn golden_section_max<F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Result<(f64, f64, usize), crate::error::Error>
where
    F: FnMut(f64) -> Result<f64, crate::error::Error>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut lo = a;
    let mut hi = b;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut evals = 2usize;
    while hi - lo > tol && evals < max_evals {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
        evals += 1;
    }
    let (xm, fm) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok((xm, fm, evals))
}
