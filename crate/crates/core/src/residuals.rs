//! Residuals for fitted shared-frailty models: Cox–Snell, martingale,
//! deviance, censored Z, and randomized-survival-probability Z-residuals.
//!
//! Randomization is per-record: the uniform for record i is a pure function
//! of (seed, i), so regenerating with the same seed is bit-for-bit
//! reproducible and subsetting a dataset leaves retained records unchanged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::fit::FrailtyFit;
use crate::seed;
use crate::stats::normal;

/// Clamp bounds applied to survival probabilities before Φ⁻¹; extreme
/// values are diagnostic signal, so clamp events are counted.
const SP_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    CoxSnell,
    Martingale,
    Deviance,
    CensoredZ,
    Z,
}

impl ResidualKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResidualKind::CoxSnell => "cox_snell",
            ResidualKind::Martingale => "martingale",
            ResidualKind::Deviance => "deviance",
            ResidualKind::CensoredZ => "censored_z",
            ResidualKind::Z => "z",
        }
    }
}

/// Residual values of one kind, aligned with the dataset records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSet {
    pub kind: ResidualKind,
    pub values: Vec<f64>,
    /// Event indicators, aligned with `values`.
    pub status: Vec<bool>,
    /// RNG seed; present only for randomized Z-residuals.
    pub seed: Option<u64>,
    /// Fitted linear predictors η̂, aligned with `values`.
    pub linear_predictors: Vec<f64>,
    /// How many survival probabilities hit the numeric clamp.
    pub clamped: usize,
}

fn base_set(
    kind: ResidualKind,
    fit: &FrailtyFit,
    dataset: &SurvivalDataset,
) -> Result<(ResidualSet, Vec<f64>)> {
    let eta = fit.linear_predictors(dataset)?;
    let surv = fit.survival_at_observed(dataset)?;
    let status: Vec<bool> = dataset.records().iter().map(|r| r.status).collect();
    Ok((
        ResidualSet {
            kind,
            values: Vec::with_capacity(dataset.n()),
            status,
            seed: None,
            linear_predictors: eta,
            clamped: 0,
        },
        surv,
    ))
}

/// Cox–Snell residuals r^c = −log S(y).
pub fn cox_snell(fit: &FrailtyFit, dataset: &SurvivalDataset) -> Result<ResidualSet> {
    let (mut set, surv) = base_set(ResidualKind::CoxSnell, fit, dataset)?;
    set.values = surv.iter().map(|s| -s.ln()).collect();
    Ok(set)
}

/// Martingale residuals r^M = δ − r^c.
pub fn martingale(fit: &FrailtyFit, dataset: &SurvivalDataset) -> Result<ResidualSet> {
    let (mut set, surv) = base_set(ResidualKind::Martingale, fit, dataset)?;
    set.values = surv
        .iter()
        .zip(&set.status)
        .map(|(s, &d)| if d { 1.0 } else { 0.0 } - (-s.ln()))
        .collect();
    Ok(set)
}

/// Deviance residuals, the symmetrizing transform of the martingale
/// residuals: sgn(r^M)·√(−2(r^M + δ log(δ − r^M))).
pub fn deviance(fit: &FrailtyFit, dataset: &SurvivalDataset) -> Result<ResidualSet> {
    let (mut set, surv) = base_set(ResidualKind::Deviance, fit, dataset)?;
    let mut values = Vec::with_capacity(surv.len());
    for (i, (s, &d)) in surv.iter().zip(&set.status).enumerate() {
        let rc = -s.ln();
        let rm = if d { 1.0 - rc } else { -rc };
        // δ log(δ − r^M) with the 0·log(·) = 0 convention for censored rows.
        // The bracket is mathematically >= 0 (log x <= x − 1); negatives at
        // rounding scale are clamped to zero.
        let bracket = if d { -2.0 * (rm + (-rm).ln_1p()) } else { -2.0 * rm };
        if !bracket.is_finite() || bracket < -1e-10 {
            return Err(Error::Invalid(format!(
                "deviance residual undefined at record {} (martingale {rm})",
                i + 1
            )));
        }
        values.push(rm.signum() * bracket.max(0.0).sqrt());
    }
    set.values = values;
    Ok(set)
}

fn clamp_sp(s: f64, clamped: &mut usize) -> f64 {
    if s < SP_CLAMP {
        *clamped += 1;
        SP_CLAMP
    } else if s > 1.0 - SP_CLAMP {
        *clamped += 1;
        1.0 - SP_CLAMP
    } else {
        s
    }
}

/// Censored Z-residuals r^n = −Φ⁻¹(S(y)); deterministic, no randomization.
pub fn censored_z(fit: &FrailtyFit, dataset: &SurvivalDataset) -> Result<ResidualSet> {
    let (mut set, surv) = base_set(ResidualKind::CensoredZ, fit, dataset)?;
    let mut clamped = 0;
    set.values = surv.iter().map(|&s| -normal::quantile(clamp_sp(s, &mut clamped))).collect();
    set.clamped = clamped;
    Ok(set)
}

/// The randomized survival probability of one record.
fn rsp_value(s: f64, status: bool, uniform: f64) -> f64 {
    if status {
        s
    } else {
        uniform * s
    }
}

/// Randomized survival probabilities: S(y) for events, U·S(y) with
/// U ~ Uniform(0,1) for censored records.
pub fn rsp(fit: &FrailtyFit, dataset: &SurvivalDataset, seed: u64) -> Result<Vec<f64>> {
    let surv = fit.survival_at_observed(dataset)?;
    Ok(surv
        .iter()
        .enumerate()
        .zip(dataset.records())
        .map(|((i, &s), r)| rsp_value(s, r.status, seed::unit_uniform(seed::derive(seed, &[i as u64]))))
        .collect())
}

/// Z-residuals r^Z = −Φ⁻¹(S^R); standard normal under the true model.
pub fn z_residual(fit: &FrailtyFit, dataset: &SurvivalDataset, seed: u64) -> Result<ResidualSet> {
    let (mut set, _) = base_set(ResidualKind::Z, fit, dataset)?;
    let sr = rsp(fit, dataset, seed)?;
    let mut clamped = 0;
    set.values = sr.iter().map(|&s| -normal::quantile(clamp_sp(s, &mut clamped))).collect();
    set.clamped = clamped;
    set.seed = Some(seed);
    Ok(set)
}

/// Serialize a residual set to CSV with columns
/// `record_id,cluster,kind,value,status,linear_predictor,seed`.
pub fn write_csv(set: &ResidualSet, dataset: &SurvivalDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    w.write_record(["record_id", "cluster", "kind", "value", "status", "linear_predictor", "seed"])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let seed_text = set.seed.map(|s| s.to_string()).unwrap_or_default();
    for (i, r) in dataset.records().iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.cluster.clone(),
            set.kind.as_str().to_string(),
            format!("{}", set.values[i]),
            if set.status[i] { "1".into() } else { "0".to_string() },
            format!("{}", set.linear_predictors[i]),
            seed_text.clone(),
        ])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
