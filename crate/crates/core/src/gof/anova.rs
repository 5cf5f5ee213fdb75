//! One-way ANOVA F-test for homogeneity of residual means across
//! equal-width bins of a covariate or the linear predictor.

use crate::error::{Error, Result};
use crate::residuals::ResidualSet;
use crate::stats::f_survival;

use super::{Grouping, TestReport};

/// Assign each value to one of k right-closed equal-width intervals over
/// the observed [min, max]; the minimum joins the first group.
pub(crate) fn assign_groups(values: &[f64], k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    if k < 2 {
        return Err(Error::Invalid(format!("grouping needs k >= 2, got {k}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("grouping values must be finite".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::Invalid("grouping variable is constant; fewer than 2 nonempty groups".into()));
    }
    let width = (hi - lo) / k as f64;
    let boundaries: Vec<f64> = (0..=k).map(|j| lo + j as f64 * width).collect();
    let idx = values
        .iter()
        .map(|&v| {
            let t = (v - lo) / width;
            if t <= 0.0 {
                0
            } else {
                (t.ceil() as usize - 1).min(k - 1)
            }
        })
        .collect();
    Ok((idx, boundaries))
}

/// Test equality of group means of the residuals across k equal-width bins
/// of `grouping_values`. Empty bins are dropped.
pub fn anova_homogeneity(
    residuals: &ResidualSet,
    grouping_values: &[f64],
    k: usize,
) -> Result<TestReport> {
    let values = &residuals.values;
    if values.len() != grouping_values.len() {
        return Err(Error::Invalid(format!(
            "residuals ({}) and grouping values ({}) are misaligned",
            values.len(),
            grouping_values.len()
        )));
    }
    let (idx, boundaries) = assign_groups(grouping_values, k)?;

    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k];
    for (&g, &v) in idx.iter().zip(values) {
        counts[g] += 1;
        sums[g] += v;
    }
    let nonempty: Vec<usize> = (0..k).filter(|&g| counts[g] > 0).collect();
    let k_used = nonempty.len();
    if k_used < 2 {
        return Err(Error::Invalid("fewer than 2 nonempty groups".into()));
    }
    let n = values.len() as f64;
    if n as usize <= k_used {
        return Err(Error::Invalid("not enough observations for within-group variance".into()));
    }

    let grand_mean = values.iter().sum::<f64>() / n;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for &g in &nonempty {
        let mean = sums[g] / counts[g] as f64;
        ssb += counts[g] as f64 * (mean - grand_mean) * (mean - grand_mean);
    }
    for (&g, &v) in idx.iter().zip(values) {
        let mean = sums[g] / counts[g] as f64;
        ssw += (v - mean) * (v - mean);
    }

    let df1 = (k_used - 1) as f64;
    let df2 = n - k_used as f64;
    let grouping = Grouping {
        k_requested: k,
        k_nonempty: k_used,
        boundaries,
        counts: nonempty.iter().map(|&g| counts[g]).collect(),
    };

    let (statistic, p_value, degenerate) = if ssw <= 0.0 {
        if ssb > 0.0 {
            (f64::INFINITY, 0.0, true)
        } else {
            (0.0, 1.0, false)
        }
    } else {
        let f = (ssb / df1) / (ssw / df2);
        (f, f_survival(f, df1, df2), false)
    };

    let mut report = TestReport::new("Z-AOV", statistic, p_value);
    report.grouping = Some(grouping);
    report.degenerate_variance = degenerate;
    Ok(report)
}
