//! Cleveland-style LOWESS: locally weighted linear regression with tricube
//! weights over the nearest span·n points and bisquare robustness
//! reweighting.

use crate::error::{Error, Result};

/// Smooth y against x. Returns (x, fitted) pairs sorted by x.
///
/// `span` is the fraction of points in each local window (0, 1];
/// `iterations` counts robustness reweightings (0 = plain fit).
pub fn lowess(x: &[f64], y: &[f64], span: f64, iterations: usize) -> Result<Vec<(f64, f64)>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Invalid("lowess: x and y lengths differ".into()));
    }
    if n < 5 {
        return Err(Error::Invalid(format!("lowess needs at least 5 points, got {n}")));
    }
    if !(0.0 < span && span <= 1.0) {
        return Err(Error::Invalid(format!("lowess span must be in (0,1], got {span}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("lowess: non-finite input".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    if xs[n - 1] - xs[0] <= 0.0 {
        return Err(Error::Invalid("lowess: x is degenerate (all values equal)".into()));
    }

    let q = ((span * n as f64).ceil() as usize).clamp(2, n);
    let mut robustness = vec![1.0; n];
    let mut fitted = vec![0.0; n];

    for iter in 0..=iterations {
        for (i, f) in fitted.iter_mut().enumerate() {
            *f = fit_at(&xs, &ys, &robustness, i, q);
        }
        if iter == iterations {
            break;
        }
        // Bisquare reweighting on |residual| scaled by 6·median.
        let mut abs_res: Vec<f64> = ys.iter().zip(&fitted).map(|(y, f)| (y - f).abs()).collect();
        let mut sorted = abs_res.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let s = 6.0 * median;
        if s <= 0.0 {
            break; // perfect fit; nothing to reweight
        }
        for (w, r) in robustness.iter_mut().zip(abs_res.iter_mut()) {
            let t = *r / s;
            *w = if t >= 1.0 { 0.0 } else { (1.0 - t * t) * (1.0 - t * t) };
        }
    }

    Ok(xs.into_iter().zip(fitted).collect())
}

/// Weighted local linear fit at the i-th sorted point.
fn fit_at(xs: &[f64], ys: &[f64], robustness: &[f64], i: usize, q: usize) -> f64 {
    let n = xs.len();
    let x0 = xs[i];

    // Window of the q nearest points by |x − x0| (two-pointer over sorted x).
    let mut lo = i;
    let mut hi = i + 1;
    while hi - lo < q {
        if lo > 0 && (hi == n || x0 - xs[lo - 1] <= xs[hi] - x0) {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let h = (x0 - xs[lo]).max(xs[hi - 1] - x0).max(0.0);

    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    let mut swxx = 0.0;
    let mut swxy = 0.0;
    for j in lo..hi {
        let d = (xs[j] - x0).abs();
        let tri = if h > 0.0 {
            let t = d / h;
            if t >= 1.0 {
                0.0
            } else {
                let c = 1.0 - t * t * t;
                c * c * c
            }
        } else {
            1.0 // all window points coincide with x0
        };
        let w = tri * robustness[j];
        if w <= 0.0 {
            continue;
        }
        sw += w;
        swx += w * xs[j];
        swy += w * ys[j];
        swxx += w * xs[j] * xs[j];
        swxy += w * xs[j] * ys[j];
    }
    if sw <= 0.0 {
        return ys[i];
    }
    let denom = sw * swxx - swx * swx;
    if denom.abs() < 1e-12 * sw * sw.max(1.0) {
        swy / sw
    } else {
        let slope = (sw * swxy - swx * swy) / denom;
        let intercept = (swy - slope * swx) / sw;
        intercept + slope * x0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_linear_data() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        for span in [0.2, 0.5, 1.0] {
            let fit = lowess(&x, &y, span, 3).unwrap();
            for (xi, fi) in &fit {
                let want = 3.0 - 2.0 * xi;
                assert!((fi - want).abs() < 1e-8, "span {span}: f({xi}) = {fi}, want {want}");
            }
        }
    }

    #[test]
    fn constant_y_stays_constant() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![4.2; 20];
        let fit = lowess(&x, &y, 0.4, 2).unwrap();
        assert!(fit.iter().all(|(_, f)| (f - 4.2).abs() < 1e-12));
    }

    #[test]
    fn tracks_sine_with_noise() {
        // Deterministic low-discrepancy "noise" keeps the test stable.
        let n = 200;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64 * std::f64::consts::TAU).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| v.sin() + 0.05 * ((i as f64 * 12.9898).sin() * 43758.5453).fract())
            .collect();
        let fit = lowess(&x, &y, 0.3, 2).unwrap();
        for (xi, fi) in fit.iter().skip(n / 10).take(n * 8 / 10) {
            assert!((fi - xi.sin()).abs() < 0.15, "f({xi}) = {fi}");
        }
    }

    #[test]
    fn degenerate_x_is_error() {
        let x = vec![1.0; 10];
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(lowess(&x, &y, 0.5, 1).is_err());
    }
}
