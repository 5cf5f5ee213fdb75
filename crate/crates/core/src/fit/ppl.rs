//! Penalized partial log-likelihood evaluation and the Newton inner loop.
//!
//! Records are sorted ascending by time once; every evaluation walks the
//! sorted order from the largest time down, maintaining running risk-set
//! sums. Ties share the full risk set at their time (Breslow).

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Immutable fit-ready view of a dataset and design matrix.
pub(crate) struct Packed {
    pub n: usize,
    pub p: usize,
    pub g: usize,
    pub frailty: bool,
    /// Sorted ascending by time.
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    pub cluster: Vec<usize>,
    /// Row-major n×p design in sorted order.
    pub x: Vec<f64>,
    /// Names used when reporting singular Hessians: p terms then g clusters.
    pub coord_names: Vec<String>,
}

impl Packed {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        time: &[f64],
        event: &[bool],
        cluster: &[usize],
        x: &[f64],
        p: usize,
        g: usize,
        frailty: bool,
        term_names: &[String],
        cluster_labels: &[String],
    ) -> Packed {
        let n = time.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
        let mut st = Vec::with_capacity(n);
        let mut se = Vec::with_capacity(n);
        let mut sc = Vec::with_capacity(n);
        let mut sx = Vec::with_capacity(n * p);
        for &i in &order {
            st.push(time[i]);
            se.push(event[i]);
            sc.push(cluster[i]);
            sx.extend_from_slice(&x[i * p..(i + 1) * p]);
        }
        let mut coord_names: Vec<String> = term_names.to_vec();
        if frailty {
            coord_names.extend(cluster_labels.iter().map(|l| format!("cluster {l}")));
        }
        Packed { n, p, g, frailty, time: st, event: se, cluster: sc, x: sx, coord_names }
    }

    pub fn dim(&self) -> usize {
        self.p + if self.frailty { self.g } else { 0 }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Linear predictors in sorted order.
    pub fn eta(&self, beta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut eta = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut e = u[self.cluster[i]];
            for (xj, bj) in self.row(i).iter().zip(beta) {
                e += xj * bj;
            }
            if !e.is_finite() {
                return Err(Error::Invalid("non-finite linear predictor".into()));
            }
            eta.push(e);
        }
        Ok(eta)
    }

    /// Cox partial log-likelihood with Breslow tie handling.
    #[allow(clippy::needless_range_loop)]
    pub fn partial_loglik(&self, eta: &[f64]) -> f64 {
        let mut ll = 0.0;
        let mut s0 = 0.0;
        let mut hi = self.n;
        while hi > 0 {
            // Tie block (lo..hi) shares one time.
            let t = self.time[hi - 1];
            let mut lo = hi;
            while lo > 0 && self.time[lo - 1] == t {
                lo -= 1;
            }
            let mut d = 0usize;
            let mut eta_events = 0.0;
            for i in lo..hi {
                s0 += eta[i].exp();
                if self.event[i] {
                    d += 1;
                    eta_events += eta[i];
                }
            }
            if d > 0 {
                ll += eta_events - d as f64 * s0.ln();
            }
            hi = lo;
        }
        ll
    }

    /// Breslow hazard steps at the distinct event times, ascending:
    /// (event_time, tied event count, increment d_v / Σ_risk exp η).
    #[allow(clippy::needless_range_loop)]
    pub fn breslow_steps(&self, eta: &[f64]) -> Vec<(f64, usize, f64)> {
        let mut steps = Vec::new();
        let mut s0 = 0.0;
        let mut hi = self.n;
        while hi > 0 {
            let t = self.time[hi - 1];
            let mut lo = hi;
            while lo > 0 && self.time[lo - 1] == t {
                lo -= 1;
            }
            let mut d = 0usize;
            for i in lo..hi {
                s0 += eta[i].exp();
                if self.event[i] {
                    d += 1;
                }
            }
            if d > 0 {
                steps.push((t, d, d as f64 / s0));
            }
            hi = lo;
        }
        steps.reverse();
        steps
    }

    /// Gradient and negative Hessian of the partial log-likelihood over the
    /// active coordinates (β, then u if frailty). Also returns the value.
    pub(crate) fn partial_derivs(&self, eta: &[f64]) -> (f64, Vec<f64>, SymMatrix) {
        let dim = self.dim();
        let p = self.p;
        let mut ll = 0.0;
        let mut grad = vec![0.0; dim];
        let mut negh = SymMatrix::zeros(dim);

        let mut s0 = 0.0;
        let mut s1 = vec![0.0; dim];
        // Upper triangle of Σ w·a aᵀ.
        let mut s2 = vec![0.0; dim * dim];
        let mut mu = vec![0.0; dim];

        let mut hi = self.n;
        while hi > 0 {
            let t = self.time[hi - 1];
            let mut lo = hi;
            while lo > 0 && self.time[lo - 1] == t {
                lo -= 1;
            }
            let mut d = 0usize;
            let mut eta_events = 0.0;
            for i in lo..hi {
                let w = eta[i].exp();
                let xi = self.row(i);
                s0 += w;
                for j in 0..p {
                    s1[j] += w * xi[j];
                    for k in j..p {
                        s2[j * dim + k] += w * xi[j] * xi[k];
                    }
                }
                if self.frailty {
                    let cu = p + self.cluster[i];
                    s1[cu] += w;
                    for j in 0..p {
                        s2[j * dim + cu] += w * xi[j];
                    }
                    s2[cu * dim + cu] += w;
                }
                if self.event[i] {
                    d += 1;
                    eta_events += eta[i];
                    for j in 0..p {
                        grad[j] += xi[j];
                    }
                    if self.frailty {
                        grad[p + self.cluster[i]] += 1.0;
                    }
                }
            }
            if d > 0 {
                let df = d as f64;
                ll += eta_events - df * s0.ln();
                for j in 0..dim {
                    mu[j] = s1[j] / s0;
                }
                for j in 0..dim {
                    grad[j] -= df * mu[j];
                    for k in j..dim {
                        negh.add(j, k, df * (s2[j * dim + k] / s0 - mu[j] * mu[k]));
                    }
                }
            }
            hi = lo;
        }

        // Mirror the upper triangle.
        for j in 0..dim {
            for k in 0..j {
                negh.a[j * dim + k] = negh.a[k * dim + j];
            }
        }
        (ll, grad, negh)
    }

}

/// Σᵢ log f_U(uᵢ | θ) where U = log Z and Z ~ Gamma(1/θ, θ) with unit mean.
///
/// Change of variables gives log f_U(u) = (u − eᵘ)/θ − ln Γ(1/θ) − ln(θ)/θ.
pub fn log_frailty_penalty(u: &[f64], theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Invalid(format!("theta must be positive, got {theta}")));
    }
    let inv = 1.0 / theta;
    let norm = statrs::function::gamma::ln_gamma(inv) + inv * theta.ln();
    let mut ll = 0.0;
    for &ui in u {
        ll += (ui - ui.exp()) * inv - norm;
    }
    Ok(ll)
}

pub(crate) struct InnerSolution {
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub max_gradient: f64,
    /// Negative Hessian of Eq 6 at the final point.
    pub negh: SymMatrix,
}

/// Newton–Raphson with step halving on (β, u) at fixed θ.
pub(crate) fn inner_newton(
    packed: &Packed,
    beta: &mut Vec<f64>,
    u: &mut Vec<f64>,
    theta: Option<f64>,
    grad_tol: f64,
    max_iter: usize,
) -> Result<InnerSolution> {
    let dim = packed.dim();
    let p = packed.p;

    let objective = |beta: &[f64], u: &[f64]| -> Result<f64> {
        let eta = packed.eta(beta, u)?;
        let mut ll = packed.partial_loglik(&eta);
        if let Some(th) = theta {
            ll += log_frailty_penalty(u, th)?;
        }
        Ok(ll)
    };

    let mut ll = objective(beta, u)?;
    let mut trace = vec![ll];

    if dim == 0 {
        return Ok(InnerSolution {
            converged: true,
            iterations: 0,
            trace,
            max_gradient: 0.0,
            negh: SymMatrix::zeros(0),
        });
    }

    let mut iterations = 0;
    loop {
        let eta = packed.eta(beta, u)?;
        let (_, mut grad, mut negh) = packed.partial_derivs(&eta);
        if let Some(th) = theta {
            for i in 0..packed.g {
                let eu = u[i].exp();
                grad[p + i] += (1.0 - eu) / th;
                negh.add(p + i, p + i, eu / th);
            }
        }

        let max_grad = grad.iter().fold(0.0f64, |m, gi| m.max(gi.abs()));
        if max_grad < grad_tol {
            return Ok(InnerSolution {
                converged: true,
                iterations,
                trace,
                max_gradient: max_grad,
                negh,
            });
        }
        if iterations >= max_iter {
            return Ok(InnerSolution {
                converged: false,
                iterations,
                trace,
                max_gradient: max_grad,
                negh,
            });
        }

        let step = negh.solve(&grad).map_err(|k| {
            Error::SingularHessian(vec![packed
                .coord_names
                .get(k)
                .cloned()
                .unwrap_or_else(|| format!("coordinate {k}"))])
        })?;

        // Predicted improvement λ²/2 from the Newton decrement. When it
        // sinks below the f64 evaluation noise of the objective, ascent is
        // no longer observable; take the full step as a polish step and let
        // the gradient criterion decide.
        let decrement: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        let noise = 1e-10 * (1.0 + ll.abs());
        if 0.5 * decrement <= noise {
            for (b, s) in beta.iter_mut().zip(&step[..p]) {
                *b += s;
            }
            if packed.frailty {
                for (ui, s) in u.iter_mut().zip(&step[p..]) {
                    *ui += s;
                }
            }
            ll = objective(beta, u)?;
            iterations += 1;
            trace.push(ll);
            continue;
        }

        // Step halving keeps Eq 6 ascending.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand_beta: Vec<f64> =
                beta.iter().zip(&step[..p]).map(|(b, s)| b + scale * s).collect();
            let cand_u: Vec<f64> = if packed.frailty {
                u.iter().zip(&step[p..]).map(|(b, s)| b + scale * s).collect()
            } else {
                u.clone()
            };
            match objective(&cand_beta, &cand_u) {
                Ok(cand_ll) if cand_ll.is_finite() && cand_ll >= ll => {
                    *beta = cand_beta;
                    *u = cand_u;
                    ll = cand_ll;
                    accepted = true;
                    break;
                }
                _ => scale *= 0.5,
            }
        }
        iterations += 1;
        if !accepted {
            // No ascent direction left at this precision; report state as-is.
            return Ok(InnerSolution {
                converged: max_grad < grad_tol * 100.0,
                iterations,
                trace,
                max_gradient: max_grad,
                negh,
            });
        }
        trace.push(ll);
    }
}
