//! Clustered Weibull/gamma-frailty data generation, censoring-rate
//! calibration, and rejection-rate experiments over the
//! (cluster size × censoring rate) grid.
//!
//! Covariates: x1 ~ Uniform[0,1], x2 half-normal (|N(0,1)|, so the log
//! transform is defined), x3 ~ Bernoulli(0.25). Event times invert
//! u ~ Uniform(0,1) through the Weibull(α, λ) baseline with linear
//! predictor β1·x1 + β2·log(x2) + β3·x3 and cluster frailty z; censoring
//! times are exponential with rate γ.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::fit::{fit_ppl, FitControl};
use crate::gof::TestMethod;
use crate::model::{CovariateSelector, ModelSpec};
use crate::seed;

/// One simulation cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Cluster count g.
    pub g: usize,
    /// Records per cluster.
    pub n_i: usize,
    /// Weibull shape α.
    pub alpha: f64,
    /// Weibull scale λ (rate parameterization: H₀(t) = λ tᵅ).
    pub lambda: f64,
    /// True coefficients on (x1, log x2, x3).
    pub beta_true: [f64; 3],
    /// Frailty variance θ; zero means degenerate frailty z ≡ 1.
    pub frailty_var: f64,
    /// Target censoring fraction; zero disables censoring.
    pub censor_rate_target: f64,
    /// Exponential censoring rate γ once resolved by calibration.
    pub censor_rate_gamma: Option<f64>,
    pub seed: u64,
}

impl SimConfig {
    /// The paper-style defaults: g = 20, Weibull(3, 0.007), β = (1, −2, 0.5),
    /// frailty variance 0.5.
    pub fn baseline(n_i: usize, censor_rate_target: f64, seed: u64) -> SimConfig {
        SimConfig {
            g: 20,
            n_i,
            alpha: 3.0,
            lambda: 0.007,
            beta_true: [1.0, -2.0, 0.5],
            frailty_var: 0.5,
            censor_rate_target,
            censor_rate_gamma: if censor_rate_target == 0.0 { Some(0.0) } else { None },
            seed,
        }
    }
}

/// Model choices fitted in the study: log(x2) (data-generating) or raw x2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    True,
    Wrong,
}

impl ModelKind {
    pub fn spec(&self) -> ModelSpec {
        let x2 = match self {
            ModelKind::True => CovariateSelector::log("x2"),
            ModelKind::Wrong => CovariateSelector::identity("x2"),
        };
        ModelSpec::new(
            vec![CovariateSelector::identity("x1"), x2, CovariateSelector::identity("x3")],
            true,
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::True => "true",
            ModelKind::Wrong => "wrong",
        }
    }
}

/// Baseline cumulative hazard of the generator: H₀(t) = λ tᵅ.
pub fn weibull_chf(alpha: f64, lambda: f64, t: f64) -> f64 {
    lambda * t.powf(alpha)
}

/// Invert u through the conditional survival function:
/// t = (−log u / (λ z e^η))^(1/α).
pub fn invert_time(u: f64, z: f64, eta: f64, alpha: f64, lambda: f64) -> f64 {
    ((-u.ln()) / (lambda * z * eta.exp())).powf(1.0 / alpha)
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    // (0, 1) both ends open so -ln(u) stays finite and positive.
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}

/// Generate one dataset together with the realized cluster frailties.
pub fn generate_with_frailties<R: Rng>(
    config: &SimConfig,
    rng: &mut R,
) -> Result<(SurvivalDataset, Vec<f64>)> {
    let gamma_rate = match (config.censor_rate_target, config.censor_rate_gamma) {
        (0.0, _) => 0.0,
        (_, Some(g)) => g,
        (_, None) => {
            return Err(Error::Invalid(
                "censoring target set but gamma unresolved; run calibrate_censoring first".into(),
            ))
        }
    };
    let frailty = if config.frailty_var > 0.0 {
        Some(
            Gamma::new(1.0 / config.frailty_var, config.frailty_var)
                .map_err(|e| Error::Invalid(format!("frailty distribution: {e}")))?,
        )
    } else {
        None
    };
    let censor = if gamma_rate > 0.0 {
        Some(Exp::new(gamma_rate).map_err(|e| Error::Invalid(format!("censoring: {e}")))?)
    } else {
        None
    };

    let mut records = Vec::with_capacity(config.g * config.n_i);
    let mut frailties = Vec::with_capacity(config.g);
    for i in 0..config.g {
        let z = frailty.as_ref().map(|d| d.sample(rng)).unwrap_or(1.0);
        frailties.push(z);
        let label = (i + 1).to_string();
        for _ in 0..config.n_i {
            let x1: f64 = rng.random();
            let x2 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng).abs();
            let x3 = if rng.random_bool(0.25) { 1.0 } else { 0.0 };
            let eta = config.beta_true[0] * x1
                + config.beta_true[1] * x2.ln()
                + config.beta_true[2] * x3;
            let t = invert_time(open_unit(rng), z, eta, config.alpha, config.lambda);
            let (time, status) = match &censor {
                Some(c) => {
                    let ct = c.sample(rng);
                    if t < ct {
                        (t, true)
                    } else {
                        (ct, false)
                    }
                }
                None => (t, true),
            };
            records.push(SurvivalRecord {
                time,
                status,
                cluster: label.clone(),
                covariates: vec![x1, x2, x3],
            });
        }
    }
    let ds = SurvivalDataset::new(records, vec!["x1".into(), "x2".into(), "x3".into()])?;
    Ok((ds, frailties))
}

/// Generate one dataset (dropping the frailty draws).
pub fn generate_dataset<R: Rng>(config: &SimConfig, rng: &mut R) -> Result<SurvivalDataset> {
    generate_with_frailties(config, rng).map(|(ds, _)| ds)
}

/// Resolve the exponential censoring rate γ hitting `target` within ±0.01.
///
/// Draws a pilot of at least `n_pilot` uncensored event times once; the
/// achieved rate at any γ is then the exact mean of 1 − exp(−γ t) over the
/// pilot, a smooth monotone function that bisection drives to the target.
pub fn calibrate_censoring<R: Rng>(
    config: &SimConfig,
    target: f64,
    n_pilot: usize,
    rng: &mut R,
) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    if !(0.0..1.0).contains(&target) {
        return Err(Error::Invalid(format!("censoring target must be in [0,1), got {target}")));
    }
    let mut pilot_cfg = config.clone();
    pilot_cfg.censor_rate_target = 0.0;
    pilot_cfg.censor_rate_gamma = Some(0.0);

    let mut times = Vec::with_capacity(n_pilot);
    while times.len() < n_pilot.max(1) {
        let (ds, _) = generate_with_frailties(&pilot_cfg, rng)?;
        times.extend(ds.records().iter().map(|r| r.time));
    }

    let rate = |gamma: f64| -> f64 {
        times.iter().map(|&t| 1.0 - (-gamma * t).exp()).sum::<f64>() / times.len() as f64
    };

    // Bracket on the log scale, then bisect.
    let mean_t = times.iter().sum::<f64>() / times.len() as f64;
    let mut lo = 1.0 / mean_t;
    let mut expansions = 0;
    while rate(lo) > target {
        lo /= 8.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoConvergence("censoring calibration bracket (low side)".into()));
        }
    }
    let mut hi = lo;
    while rate(hi) < target {
        hi *= 8.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoConvergence("censoring calibration bracket (high side)".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo.ln() + hi.ln()) / 2.0;
        let g = mid.exp();
        if rate(g) < target {
            lo = g;
        } else {
            hi = g;
        }
        if (rate(g) - target).abs() < 1e-4 {
            return Ok(g);
        }
    }
    Ok((lo * hi).sqrt())
}

/// The experiment grid of the rejection-rate study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    pub g: usize,
    pub cluster_sizes: Vec<usize>,
    pub censor_targets: Vec<f64>,
    pub n_replicates: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub beta_true: [f64; 3],
    pub frailty_var: f64,
    pub models: Vec<ModelKind>,
    pub tests: Vec<TestMethod>,
    pub anova_k: usize,
    pub n_pilot: usize,
}

impl Default for ExperimentGrid {
    /// Desk-scale profile; `paper_scale` switches to the full study layout.
    fn default() -> Self {
        ExperimentGrid {
            g: 20,
            cluster_sizes: vec![10, 40, 100],
            censor_targets: vec![0.0, 0.5],
            n_replicates: 200,
            alpha: 3.0,
            lambda: 0.007,
            beta_true: [1.0, -2.0, 0.5],
            frailty_var: 0.5,
            models: vec![ModelKind::True, ModelKind::Wrong],
            tests: vec![
                TestMethod::ZSw,
                TestMethod::ZSf,
                TestMethod::ZKs,
                TestMethod::DevSw,
                TestMethod::CzCsf,
                TestMethod::ZAovLp,
                TestMethod::ZAovCov(CovariateSelector::log("x2")),
            ],
            anova_k: 10,
            n_pilot: 100_000,
        }
    }
}

impl ExperimentGrid {
    /// The full study layout: cluster sizes 10..100, four censoring rates,
    /// 1000 replicates.
    pub fn paper_scale(mut self) -> Self {
        self.cluster_sizes = (1..=10).map(|k| k * 10).collect();
        self.censor_targets = vec![0.0, 0.2, 0.5, 0.8];
        self.n_replicates = 1000;
        self
    }
}

/// One line of the long-format rejection-rate table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectionRow {
    pub cluster_size: usize,
    pub censor_target: f64,
    pub model: String,
    pub test: String,
    pub n_used: usize,
    pub n_failed: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
}

/// Run metadata emitted alongside the table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub grid: ExperimentGrid,
    pub seed: u64,
    pub parallelism: usize,
    /// Calibrated exponential rates per censoring target.
    pub gamma_by_target: Vec<(f64, f64)>,
    pub elapsed_seconds: f64,
    pub version: String,
}

pub struct GridOutput {
    pub rows: Vec<RejectionRow>,
    pub manifest: RunManifest,
}

struct ModelOutcome {
    fit_failed: bool,
    /// One entry per test; `None` records a per-replicate test failure.
    rejects: Vec<Option<bool>>,
}

/// Run the rejection-rate study. Identical grid + seed produce an
/// identical table for any parallelism degree.
pub fn run_grid(grid: &ExperimentGrid, parallelism: usize, master_seed: u64) -> Result<GridOutput> {
    let started = Instant::now();
    let control = FitControl::default();

    // γ depends only on the marginal time distribution, so calibrate once
    // per censoring target.
    let mut gamma_by_target = Vec::new();
    for (ti, &target) in grid.censor_targets.iter().enumerate() {
        let cfg = SimConfig {
            g: grid.g,
            n_i: 50,
            alpha: grid.alpha,
            lambda: grid.lambda,
            beta_true: grid.beta_true,
            frailty_var: grid.frailty_var,
            censor_rate_target: target,
            censor_rate_gamma: None,
            seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(master_seed, &[0xCA11B, ti as u64]));
        let gamma = calibrate_censoring(&cfg, target, grid.n_pilot, &mut rng)?;
        gamma_by_target.push((target, gamma));
    }

    let specs: Vec<ModelSpec> = grid.models.iter().map(|m| m.spec()).collect();
    let mut rows = Vec::new();

    for (si, &size) in grid.cluster_sizes.iter().enumerate() {
        for (ti, &target) in grid.censor_targets.iter().enumerate() {
            let cell_idx = (si * grid.censor_targets.len() + ti) as u64;
            let gamma = gamma_by_target[ti].1;
            let cfg = SimConfig {
                g: grid.g,
                n_i: size,
                alpha: grid.alpha,
                lambda: grid.lambda,
                beta_true: grid.beta_true,
                frailty_var: grid.frailty_var,
                censor_rate_target: target,
                censor_rate_gamma: Some(gamma),
                seed: 0,
            };

            let outcomes: Vec<Vec<ModelOutcome>> =
                crate::par::map_indexed(parallelism, grid.n_replicates, |r| {
                    let rep_seed = seed::derive(master_seed, &[cell_idx, r as u64]);
                    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
                    let dataset = generate_dataset(&cfg, &mut rng)?;
                    let mut per_model = Vec::with_capacity(specs.len());
                    for (mi, spec) in specs.iter().enumerate() {
                        let fit = match fit_ppl(&dataset, spec, &control) {
                            Ok(f) if f.converged => f,
                            _ => {
                                per_model.push(ModelOutcome {
                                    fit_failed: true,
                                    rejects: vec![None; grid.tests.len()],
                                });
                                continue;
                            }
                        };
                        let z_seed = seed::derive(rep_seed, &[0x5EED, mi as u64]);
                        let rejects = grid
                            .tests
                            .iter()
                            .map(|m| {
                                crate::gof::run_method(&fit, &dataset, m, grid.anova_k, z_seed)
                                    .ok()
                                    .map(|rep| rep.p_value < 0.05)
                            })
                            .collect();
                        per_model.push(ModelOutcome { fit_failed: false, rejects });
                    }
                    Ok(per_model)
                })?;

            for (mi, model) in grid.models.iter().enumerate() {
                for (qi, test) in grid.tests.iter().enumerate() {
                    let mut used = 0usize;
                    let mut failed = 0usize;
                    let mut rejected = 0usize;
                    for rep in &outcomes {
                        let m = &rep[mi];
                        if m.fit_failed {
                            failed += 1;
                            continue;
                        }
                        match m.rejects[qi] {
                            Some(r) => {
                                used += 1;
                                if r {
                                    rejected += 1;
                                }
                            }
                            None => failed += 1,
                        }
                    }
                    let rate = if used > 0 { rejected as f64 / used as f64 } else { f64::NAN };
                    let mc_se =
                        if used > 0 { (rate * (1.0 - rate) / used as f64).sqrt() } else { f64::NAN };
                    rows.push(RejectionRow {
                        cluster_size: size,
                        censor_target: target,
                        model: model.label().to_string(),
                        test: test.display_name(),
                        n_used: used,
                        n_failed: failed,
                        rejection_rate: rate,
                        mc_se,
                    });
                }
            }
        }
    }

    Ok(GridOutput {
        rows,
        manifest: RunManifest {
            grid: grid.clone(),
            seed: master_seed,
            parallelism,
            gamma_by_target,
            elapsed_seconds: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Long-format CSV: one row per (cell, model, test).
pub fn write_rejection_csv(rows: &[RejectionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    w.write_record([
        "cluster_size",
        "censor_target",
        "model",
        "test",
        "n_used",
        "n_failed",
        "rejection_rate",
        "mc_se",
    ])
    .map_err(|e| Error::Invalid(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.cluster_size.to_string(),
            format!("{}", r.censor_target),
            r.model.clone(),
            r.test.clone(),
            r.n_used.to_string(),
            r.n_failed.to_string(),
            format!("{}", r.rejection_rate),
            format!("{}", r.mc_se),
        ])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_manifest(manifest: &RunManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
