//! Kaplan–Meier cumulative hazard of Cox–Snell residuals.

use crate::error::{Error, Result};
use crate::residuals::ResidualSet;

/// KM estimate of the cumulative hazard of the residual values, treating
/// the residual status as censoring. Returns (value, −log Ŝ) pairs at the
/// distinct uncensored values, ascending; the final pair is +∞ when the
/// survivor estimate reaches zero.
pub fn km_chf(cs_residuals: &ResidualSet) -> Result<Vec<(f64, f64)>> {
    let values = &cs_residuals.values;
    let status = &cs_residuals.status;
    let n = values.len();
    if !status.iter().any(|&s| s) {
        return Err(Error::Invalid("KM cumulative hazard needs at least one uncensored residual".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("KM cumulative hazard: non-finite residual".into()));
    }

    // Ascending by value; events precede censorings at ties so the risk set
    // at an event value still contains the tied censored records.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(status[b].cmp(&status[a])));

    let mut out = Vec::new();
    let mut at_risk = n;
    let mut survivor = 1.0f64;
    let mut i = 0;
    while i < n {
        let v = values[order[i]];
        let mut d = 0usize;
        let mut c = 0usize;
        while i < n && values[order[i]] == v {
            if status[order[i]] {
                d += 1;
            } else {
                c += 1;
            }
            i += 1;
        }
        if d > 0 {
            survivor *= 1.0 - d as f64 / at_risk as f64;
            out.push((v, -survivor.ln()));
        }
        at_risk -= d + c;
    }
    Ok(out)
}
