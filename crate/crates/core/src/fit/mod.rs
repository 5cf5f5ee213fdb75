//! Shared gamma-frailty proportional-hazards fitting by penalized partial
//! likelihood, with Breslow baseline estimation.
//!
//! The inner loop is Newton–Raphson on (β, u) at fixed frailty variance θ,
//! with step halving to enforce ascent of the penalized objective. The
//! outer loop maximizes the gamma-frailty profile marginal log-likelihood
//! over log θ by golden section.

mod marginal;
mod ppl;

use serde::{Deserialize, Serialize};

use crate::data::{SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Transform};

pub(crate) use ppl::Packed;

/// Right-continuous step estimate of the baseline cumulative hazard.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineHazard {
    /// Strictly increasing distinct event times.
    pub event_times: Vec<f64>,
    /// Hazard jump at each event time.
    pub increments: Vec<f64>,
    /// Running sums of `increments`.
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    fn from_steps(steps: Vec<(f64, usize, f64)>) -> BaselineHazard {
        let mut event_times = Vec::with_capacity(steps.len());
        let mut increments = Vec::with_capacity(steps.len());
        let mut cumulative = Vec::with_capacity(steps.len());
        let mut sum = 0.0;
        for (t, _, inc) in steps {
            sum += inc;
            event_times.push(t);
            increments.push(inc);
            cumulative.push(sum);
        }
        BaselineHazard { event_times, increments, cumulative }
    }

    /// Ĥ₀(t); zero before the first event time, held constant past the last.
    pub fn chf_at(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&et| et <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

/// Convergence tolerances and iteration budgets for [`fit_ppl`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitControl {
    /// Max-norm bound on the penalized-likelihood gradient (inner loop).
    pub grad_tol: f64,
    pub max_inner: usize,
    /// Budget of profile-likelihood evaluations (outer loop).
    pub max_outer: usize,
    /// Search bracket for θ, expanded once upward if the maximum sits on
    /// the upper edge.
    pub theta_bracket: (f64, f64),
    /// Bracket-width tolerance on log θ.
    pub theta_tol: f64,
}

impl Default for FitControl {
    fn default() -> Self {
        FitControl {
            grad_tol: 1e-6,
            max_inner: 50,
            max_outer: 200,
            theta_bracket: (1e-4, 10.0),
            theta_tol: 1e-5,
        }
    }
}

/// A fitted shared gamma-frailty proportional-hazards model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrailtyFit {
    pub spec: ModelSpec,
    /// Display labels for the β terms (e.g. `log(x2)`).
    pub term_names: Vec<String>,
    /// Dataset covariate columns present at fit time, in order.
    pub data_columns: Vec<String>,
    pub beta: Vec<f64>,
    pub stderr_beta: Vec<f64>,
    /// Cluster labels in internal order, aligned with `u`.
    pub cluster_labels: Vec<String>,
    /// Log-frailties û_i (all zero when frailty is off).
    pub u: Vec<f64>,
    /// Frailty variance θ̂ (zero when frailty is off).
    pub theta: f64,
    pub baseline: BaselineHazard,
    pub converged: bool,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Penalized log-likelihood at each accepted step of the final inner
    /// solve; non-decreasing.
    pub ppl_trace: Vec<f64>,
    /// Profile marginal log-likelihood at θ̂ (frailties integrated out), or
    /// the plugged-in full log-likelihood when frailty is off.
    pub marginal_loglik: f64,
    pub aic: f64,
    /// θ̂ stopped at the lower bracket edge: no evidence of frailty.
    pub theta_at_lower_bound: bool,
    pub message: Option<String>,
    /// How standard errors were computed (output metadata).
    pub stderr_method: String,
}

impl FrailtyFit {
    /// Resolve a record's cluster label to the internal index.
    pub fn cluster_index(&self, label: &str) -> Result<usize> {
        self.cluster_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Invalid(format!("unknown cluster `{label}`")))
    }

    /// Linear predictors η̂ = x β̂ + û for every record of a dataset.
    pub fn linear_predictors(&self, dataset: &SurvivalDataset) -> Result<Vec<f64>> {
        let x = self.spec.design_matrix(dataset)?;
        let p = self.beta.len();
        let mut cluster_map = Vec::with_capacity(dataset.n_clusters());
        for label in dataset.cluster_labels() {
            cluster_map.push(self.cluster_index(label)?);
        }
        let mut eta = Vec::with_capacity(dataset.n());
        for (i, &c) in dataset.cluster_indices().iter().enumerate() {
            let mut e = self.u[cluster_map[c]];
            for j in 0..p {
                e += x[i * p + j] * self.beta[j];
            }
            eta.push(e);
        }
        Ok(eta)
    }

    /// Fitted survival probabilities S(y_ij) at each record's observed time.
    pub fn survival_at_observed(&self, dataset: &SurvivalDataset) -> Result<Vec<f64>> {
        let eta = self.linear_predictors(dataset)?;
        Ok(dataset
            .records()
            .iter()
            .zip(&eta)
            .map(|(r, &e)| survival_from_eta(e, self.baseline.chf_at(r.time)))
            .collect())
    }
}

fn survival_from_eta(eta: f64, chf: f64) -> f64 {
    (-(eta.exp() * chf)).exp().max(1e-300)
}

/// Cox partial log-likelihood (Eq form: events contribute η minus the log
/// risk-set sum; Breslow ties).
pub fn partial_loglik(
    beta: &[f64],
    u: &[f64],
    dataset: &SurvivalDataset,
    spec: &ModelSpec,
) -> Result<f64> {
    let packed = pack(dataset, spec, beta, u)?;
    let eta = packed.eta(beta, u)?;
    Ok(packed.partial_loglik(&eta))
}

/// Log-density sum of the log-frailties: Σᵢ log f_U(uᵢ | θ) for U = log Z,
/// Z ~ Gamma(1/θ, θ).
pub fn penalty_loglik(u: &[f64], theta: f64) -> Result<f64> {
    ppl::log_frailty_penalty(u, theta)
}

/// Analytic gradient of the penalized partial log-likelihood over the
/// active coordinates: β first, then u when frailty is on (`theta` is the
/// frailty variance and is ignored otherwise).
pub fn ppl_gradient(
    beta: &[f64],
    u: &[f64],
    theta: f64,
    dataset: &SurvivalDataset,
    spec: &ModelSpec,
) -> Result<Vec<f64>> {
    let packed = pack(dataset, spec, beta, u)?;
    let eta = packed.eta(beta, u)?;
    let (_, mut grad, _) = packed.partial_derivs(&eta);
    if spec.frailty {
        if theta <= 0.0 || theta.is_nan() {
            return Err(Error::Invalid(format!("theta must be positive, got {theta}")));
        }
        let p = spec.n_terms();
        for (i, &ui) in u.iter().enumerate() {
            grad[p + i] += (1.0 - ui.exp()) / theta;
        }
    }
    Ok(grad)
}

/// Breslow step estimator of the baseline cumulative hazard at (β, u).
pub fn breslow_baseline(
    beta: &[f64],
    u: &[f64],
    dataset: &SurvivalDataset,
    spec: &ModelSpec,
) -> Result<BaselineHazard> {
    let packed = pack(dataset, spec, beta, u)?;
    let eta = packed.eta(beta, u)?;
    Ok(BaselineHazard::from_steps(packed.breslow_steps(&eta)))
}

fn pack(
    dataset: &SurvivalDataset,
    spec: &ModelSpec,
    beta: &[f64],
    u: &[f64],
) -> Result<Packed> {
    if beta.len() != spec.n_terms() {
        return Err(Error::Invalid(format!(
            "beta has {} entries but the model has {} terms",
            beta.len(),
            spec.n_terms()
        )));
    }
    if u.len() != dataset.n_clusters() {
        return Err(Error::Invalid(format!(
            "u has {} entries but the dataset has {} clusters",
            u.len(),
            dataset.n_clusters()
        )));
    }
    let x = spec.design_matrix(dataset)?;
    let time: Vec<f64> = dataset.records().iter().map(|r| r.time).collect();
    let event: Vec<bool> = dataset.records().iter().map(|r| r.status).collect();
    Ok(Packed::new(
        &time,
        &event,
        dataset.cluster_indices(),
        &x,
        spec.n_terms(),
        dataset.n_clusters(),
        spec.frailty,
        &spec.term_labels(),
        dataset.cluster_labels(),
    ))
}

/// Fit the model by penalized partial likelihood.
///
/// Non-convergence within the iteration budget produces an `Ok` fit with
/// `converged = false` and the trace attached, never a silent answer.
pub fn fit_ppl(
    dataset: &SurvivalDataset,
    spec: &ModelSpec,
    control: &FitControl,
) -> Result<FrailtyFit> {
    let p = spec.n_terms();
    let g = dataset.n_clusters();
    if spec.frailty && g < 2 {
        return Err(Error::Invalid("frailty requires at least 2 clusters".into()));
    }

    let mut beta = vec![0.0; p];
    let mut u = vec![0.0; g];
    let packed = pack(dataset, spec, &beta, &u)?;

    let mut inner_total = 0usize;
    let mut outer_evals = 0usize;

    let build = |packed: &Packed,
                 beta: Vec<f64>,
                 u: Vec<f64>,
                 theta: f64,
                 sol: ppl::InnerSolution,
                 inner_total: usize,
                 outer_evals: usize,
                 theta_at_lower_bound: bool,
                 message: Option<String>|
     -> Result<FrailtyFit> {
        let eta = packed.eta(&beta, &u)?;
        let steps = packed.breslow_steps(&eta);
        let baseline = BaselineHazard::from_steps(steps.clone());

        let marginal = marginal_of(packed, &beta, &baseline, &steps, theta, spec.frailty);
        let k_params = p + usize::from(spec.frailty);
        let aic = -2.0 * marginal + 2.0 * k_params as f64;

        let stderr_beta = if p == 0 {
            Vec::new()
        } else {
            let inv = sol.negh.inverse().map_err(|k| {
                Error::SingularHessian(vec![packed
                    .coord_names
                    .get(k)
                    .cloned()
                    .unwrap_or_else(|| format!("coordinate {k}"))])
            })?;
            (0..p).map(|j| inv.at(j, j).max(0.0).sqrt()).collect()
        };

        Ok(FrailtyFit {
            spec: spec.clone(),
            term_names: spec.term_labels(),
            data_columns: dataset.covariate_names().to_vec(),
            beta,
            stderr_beta,
            cluster_labels: dataset.cluster_labels().to_vec(),
            u,
            theta,
            baseline,
            converged: sol.converged,
            inner_iterations: inner_total,
            outer_iterations: outer_evals,
            ppl_trace: sol.trace,
            marginal_loglik: marginal,
            aic,
            theta_at_lower_bound,
            message,
            stderr_method: "inverse negative Hessian of the penalized partial log-likelihood, \
                            beta block"
                .into(),
        })
    };

    if !spec.frailty {
        let sol = ppl::inner_newton(&packed, &mut beta, &mut u, None, control.grad_tol, control.max_inner)?;
        inner_total += sol.iterations;
        let message =
            (!sol.converged).then(|| format!("inner loop stopped at max gradient {:.3e}", sol.max_gradient));
        return build(&packed, beta, u, 0.0, sol, inner_total, 0, false, message);
    }

    // Outer loop: golden-section maximization of the profile marginal
    // log-likelihood over log θ, warm-starting each inner solve.
    let (theta_lo, theta_hi) = control.theta_bracket;
    if !(theta_lo > 0.0 && theta_hi > theta_lo) {
        return Err(Error::Invalid("theta bracket must satisfy 0 < lo < hi".into()));
    }

    struct OuterState {
        beta: Vec<f64>,
        u: Vec<f64>,
        inner_total: usize,
        last_theta: f64,
        stalled: Option<ppl::InnerSolution>,
    }
    let mut state =
        OuterState { beta, u, inner_total: 0, last_theta: 0.5, stalled: None };

    fn profile(
        packed: &Packed,
        control: &FitControl,
        state: &mut OuterState,
        ln_theta: f64,
    ) -> Result<f64> {
        let theta = ln_theta.exp();
        state.last_theta = theta;
        let sol = ppl::inner_newton(
            packed,
            &mut state.beta,
            &mut state.u,
            Some(theta),
            control.grad_tol,
            control.max_inner,
        )?;
        state.inner_total += sol.iterations;
        if !sol.converged {
            let msg = format!(
                "inner loop at theta={theta:.6} stalled at max gradient {:.3e}",
                sol.max_gradient
            );
            state.stalled = Some(sol);
            return Err(Error::NoConvergence(msg));
        }
        let eta = packed.eta(&state.beta, &state.u)?;
        let steps = packed.breslow_steps(&eta);
        let baseline = BaselineHazard::from_steps(steps.clone());
        Ok(marginal_of(packed, &state.beta, &baseline, &steps, theta, true))
    }

    let mut bracket = (theta_lo.ln(), theta_hi.ln());
    let mut expanded = false;
    let mut theta_hat;
    loop {
        let search = marginal::golden_section_max(
            |lt| profile(&packed, control, &mut state, lt),
            bracket.0,
            bracket.1,
            control.theta_tol,
            control.max_outer.saturating_sub(outer_evals),
        );
        match search {
            Ok((ln_theta, _, evals)) => {
                outer_evals += evals;
                theta_hat = ln_theta;
                if !expanded && bracket.1 - ln_theta < 3.0 * control.theta_tol {
                    // Maximum on the upper edge: expand the bracket once.
                    expanded = true;
                    bracket = (bracket.1, bracket.1 + 100.0f64.ln());
                    continue;
                }
                break;
            }
            Err(Error::NoConvergence(msg)) if state.stalled.is_some() => {
                // Explicit non-converged result carrying the trace.
                let sol = state.stalled.take().unwrap();
                let theta = state.last_theta;
                return build(
                    &packed,
                    state.beta,
                    state.u,
                    theta,
                    sol,
                    state.inner_total,
                    outer_evals,
                    false,
                    Some(msg),
                );
            }
            Err(e) => return Err(e),
        }
    }

    let mut at_lower = false;
    let mut message = None;
    if theta_hat - theta_lo.ln() < 3.0 * control.theta_tol {
        theta_hat = theta_lo.ln();
        at_lower = true;
        message = Some("theta at lower bracket boundary: no evidence of frailty".to_string());
    }

    // Final inner solve at θ̂ for the reported trace and standard errors.
    let theta = theta_hat.exp();
    let sol = ppl::inner_newton(
        &packed,
        &mut state.beta,
        &mut state.u,
        Some(theta),
        control.grad_tol,
        control.max_inner,
    )?;
    inner_total = state.inner_total + sol.iterations;
    if !sol.converged {
        message = Some(format!("final inner loop stopped at max gradient {:.3e}", sol.max_gradient));
    }
    build(&packed, state.beta, state.u, theta, sol, inner_total, outer_evals, at_lower, message)
}

fn marginal_of(
    packed: &Packed,
    beta: &[f64],
    baseline: &BaselineHazard,
    steps: &[(f64, usize, f64)],
    theta: f64,
    frailty: bool,
) -> f64 {
    let n = packed.n;
    let p = packed.p;
    let mut exp_xbeta = Vec::with_capacity(n);
    let mut chf = Vec::with_capacity(n);
    let mut xbeta_event_sum = 0.0;
    for i in 0..n {
        let xi = &packed.x[i * p..(i + 1) * p];
        let xb: f64 = xi.iter().zip(beta).map(|(x, b)| x * b).sum();
        exp_xbeta.push(xb.exp());
        chf.push(baseline.chf_at(packed.time[i]));
        if packed.event[i] {
            xbeta_event_sum += xb;
        }
    }
    let increments: Vec<(f64, f64)> = steps.iter().map(|&(t, _, h)| (t, h)).collect();
    let tied: Vec<f64> = steps.iter().map(|&(_, d, _)| d as f64).collect();
    if frailty {
        let sums = marginal::cluster_sums(packed.g, &packed.cluster, &packed.event, &exp_xbeta, &chf);
        marginal::marginal_loglik_frailty(&increments, &tied, xbeta_event_sum, &sums, theta)
    } else {
        marginal::marginal_loglik_no_frailty(&increments, &tied, xbeta_event_sum, &exp_xbeta, &chf)
    }
}

/// Fitted survival probability S_ij(t) = exp(−exp(x β̂ + û_i) Ĥ₀(t)).
pub fn survival_prob(fit: &FrailtyFit, record: &SurvivalRecord, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Invalid(format!("t must be positive and finite, got {t}")));
    }
    let ci = fit.cluster_index(&record.cluster)?;
    if record.covariates.len() != fit.data_columns.len() {
        return Err(Error::Invalid(format!(
            "record has {} covariates but the fit expects columns {:?}",
            record.covariates.len(),
            fit.data_columns
        )));
    }
    let mut eta = fit.u[ci];
    for (sel, b) in fit.spec.covariates.iter().zip(&fit.beta) {
        let pos = fit
            .data_columns
            .iter()
            .position(|c| c == &sel.column)
            .ok_or_else(|| Error::Schema(format!("fit has no data column `{}`", sel.column)))?;
        let raw = record.covariates[pos];
        let v = match sel.transform {
            Transform::Identity => raw,
            Transform::Log => {
                if raw <= 0.0 {
                    return Err(Error::Invalid(format!(
                        "log transform of `{}` needs a positive value, got {raw}",
                        sel.column
                    )));
                }
                raw.ln()
            }
        };
        eta += v * b;
    }
    Ok(survival_from_eta(eta, fit.baseline.chf_at(t)))
}
