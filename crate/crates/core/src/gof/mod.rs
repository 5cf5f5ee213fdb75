//! Numerical goodness-of-fit and non-homogeneity tests, the replicated
//! p-value bound, and the replicate-test driver.

mod anova;
mod km;
mod ks;
mod shapiro;

pub use anova::anova_homogeneity;
pub(crate) use anova::assign_groups as assign_groups_for_plots;
pub use km::km_chf;
pub use ks::{ks_test_normal, ks_test_uniform};
pub use shapiro::{sf_test, sf_test_censored, sw_test};

use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::fit::FrailtyFit;
use crate::model::CovariateSelector;
use crate::residuals;
use crate::seed;

/// Bin structure used by the non-homogeneity tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grouping {
    pub k_requested: usize,
    pub k_nonempty: usize,
    /// k+1 interval edges over the observed range.
    pub boundaries: Vec<f64>,
    /// Record counts of the nonempty groups.
    pub counts: Vec<usize>,
}

/// Outcome of a single test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub grouping: Option<Grouping>,
    pub covariate_label: Option<String>,
    /// Zero within-group variance with unequal means (p forced to 0).
    pub degenerate_variance: bool,
}

impl TestReport {
    pub(crate) fn new(name: &str, statistic: f64, p_value: f64) -> TestReport {
        TestReport {
            test_name: name.to_string(),
            statistic,
            p_value,
            grouping: None,
            covariate_label: None,
            degenerate_variance: false,
        }
    }

    /// Paper-style method name, e.g. `Z-AOV-log(x2)` for covariate grouping.
    pub fn display_name(&self) -> String {
        match &self.covariate_label {
            Some(label) if self.test_name == "Z-AOV-COV" => format!("Z-AOV-{label}"),
            _ => self.test_name.clone(),
        }
    }
}

/// Conservative upper bound on replicated randomized-test p-values:
/// sort ascending and take min over r of min(1, p_(r)·J/r).
pub fn pmin(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::Invalid("pmin needs at least one p-value".into()));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Invalid("pmin: p-values must lie in [0,1]".into()));
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let j = sorted.len() as f64;
    let mut best = 1.0f64;
    for (r, p) in sorted.iter().enumerate() {
        best = best.min((p * (j / (r + 1) as f64)).min(1.0));
    }
    Ok(best)
}

/// A selected test method, in the paper's R-T naming scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method", content = "covariate")]
pub enum TestMethod {
    ZSw,
    ZSf,
    ZKs,
    /// Comparison method only: deviance residuals lack a reference
    /// distribution under censoring, so Dev-SW rejects correctly specified
    /// models at rates approaching 1 once censoring is substantial.
    DevSw,
    CzCsf,
    ZAovLp,
    ZAovCov(CovariateSelector),
}

impl TestMethod {
    /// Parse a CLI method name; `cov` supplies the grouping covariate for
    /// `z-aov-cov`.
    pub fn parse(name: &str, cov: Option<&str>) -> Result<TestMethod> {
        match name {
            "z-sw" => Ok(TestMethod::ZSw),
            "z-sf" => Ok(TestMethod::ZSf),
            "z-ks" => Ok(TestMethod::ZKs),
            "dev-sw" => Ok(TestMethod::DevSw),
            "cz-csf" => Ok(TestMethod::CzCsf),
            "z-aov-lp" => Ok(TestMethod::ZAovLp),
            "z-aov-cov" => {
                let cov = cov.ok_or_else(|| {
                    Error::Invalid("method z-aov-cov requires --cov <name[:log]>".into())
                })?;
                Ok(TestMethod::ZAovCov(CovariateSelector::parse(cov)?))
            }
            other => Err(Error::Invalid(format!("unknown test method `{other}`"))),
        }
    }

    /// Whether the method consumes randomized Z-residuals.
    pub fn randomized(&self) -> bool {
        !matches!(self, TestMethod::DevSw | TestMethod::CzCsf)
    }

    pub fn display_name(&self) -> String {
        match self {
            TestMethod::ZSw => "Z-SW".into(),
            TestMethod::ZSf => "Z-SF".into(),
            TestMethod::ZKs => "Z-KS".into(),
            TestMethod::DevSw => "Dev-SW".into(),
            TestMethod::CzCsf => "CZ-CSF".into(),
            TestMethod::ZAovLp => "Z-AOV-LP".into(),
            TestMethod::ZAovCov(sel) => format!("Z-AOV-{}", sel.label()),
        }
    }
}

fn apply_to_z(
    method: &TestMethod,
    z: &residuals::ResidualSet,
    dataset: &SurvivalDataset,
    k: usize,
) -> Result<TestReport> {
    match method {
        TestMethod::ZSw => {
            let mut r = sw_test(&z.values)?;
            r.test_name = "Z-SW".into();
            Ok(r)
        }
        TestMethod::ZSf => {
            let mut r = sf_test(&z.values)?;
            r.test_name = "Z-SF".into();
            Ok(r)
        }
        TestMethod::ZKs => ks_test_normal(&z.values),
        TestMethod::ZAovLp => {
            let mut r = anova_homogeneity(z, &z.linear_predictors, k)?;
            r.test_name = "Z-AOV-LP".into();
            Ok(r)
        }
        TestMethod::ZAovCov(sel) => {
            let grouping = sel.values(dataset)?;
            let mut r = anova_homogeneity(z, &grouping, k)?;
            r.test_name = "Z-AOV-COV".into();
            r.covariate_label = Some(sel.label());
            Ok(r)
        }
        _ => unreachable!("deterministic method routed to apply_to_z"),
    }
}

fn apply_deterministic(
    method: &TestMethod,
    fit: &FrailtyFit,
    dataset: &SurvivalDataset,
) -> Result<TestReport> {
    match method {
        TestMethod::DevSw => {
            let dev = residuals::deviance(fit, dataset)?;
            let mut r = sw_test(&dev.values)?;
            r.test_name = "Dev-SW".into();
            Ok(r)
        }
        TestMethod::CzCsf => {
            let cz = residuals::censored_z(fit, dataset)?;
            sf_test_censored(&cz.values, &cz.status)
        }
        _ => unreachable!("randomized method routed to apply_deterministic"),
    }
}

/// Run one test method with a single Z-residual draw at `seed`.
pub fn run_method(
    fit: &FrailtyFit,
    dataset: &SurvivalDataset,
    method: &TestMethod,
    k: usize,
    seed: u64,
) -> Result<TestReport> {
    if method.randomized() {
        let z = residuals::z_residual(fit, dataset, seed)?;
        apply_to_z(method, &z, dataset, k)
    } else {
        apply_deterministic(method, fit, dataset)
    }
}

/// Replicated p-values for one method plus the p_min bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub test_name: String,
    pub replicates: usize,
    pub p_values: Vec<f64>,
    pub p_min: f64,
    pub per_replicate_seeds: Vec<u64>,
}

/// CSV serialization of replication reports: one row per replicate p-value.
pub fn write_replication_csv(
    reports: &[ReplicationReport],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    w.write_record(["test", "replicate", "seed", "p_value", "p_min"])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    for rep in reports {
        for (j, (p, s)) in rep.p_values.iter().zip(&rep.per_replicate_seeds).enumerate() {
            w.write_record([
                rep.test_name.clone(),
                (j + 1).to_string(),
                s.to_string(),
                format!("{p}"),
                format!("{}", rep.p_min),
            ])
            .map_err(|e| Error::Invalid(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Regenerate Z-residuals J times with derived seeds and apply every
/// selected test to each set; deterministic methods contribute the same
/// p-value to every replicate. Deterministic given `seed` for any
/// parallelism degree.
pub fn replicate_tests(
    fit: &FrailtyFit,
    dataset: &SurvivalDataset,
    methods: &[TestMethod],
    replicates: usize,
    seed: u64,
    k: usize,
    parallelism: usize,
) -> Result<Vec<ReplicationReport>> {
    if replicates == 0 {
        return Err(Error::Invalid("replicates must be at least 1".into()));
    }
    let needs_z = methods.iter().any(|m| m.randomized());
    let deterministic: Vec<Option<TestReport>> = methods
        .iter()
        .map(|m| if m.randomized() { Ok(None) } else { apply_deterministic(m, fit, dataset).map(Some) })
        .collect::<Result<_>>()?;

    let per_replicate: Vec<(u64, Vec<f64>)> = crate::par::map_indexed(parallelism, replicates, |j| {
        let seed_j = seed::derive(seed, &[j as u64]);
        let z = if needs_z { Some(residuals::z_residual(fit, dataset, seed_j)?) } else { None };
        let mut ps = Vec::with_capacity(methods.len());
        for (m, det) in methods.iter().zip(&deterministic) {
            let p = match det {
                Some(report) => report.p_value,
                None => {
                    apply_to_z(m, z.as_ref().expect("z computed when needed"), dataset, k)
                        .map_err(|e| Error::Invalid(format!("replicate {j}: {e}")))?
                        .p_value
                }
            };
            ps.push(p);
        }
        Ok((seed_j, ps))
    })?;

    let seeds: Vec<u64> = per_replicate.iter().map(|(s, _)| *s).collect();
    methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let p_values: Vec<f64> = per_replicate.iter().map(|(_, ps)| ps[mi]).collect();
            let p_min = pmin(&p_values)?;
            Ok(ReplicationReport {
                test_name: m.display_name(),
                replicates,
                p_values,
                p_min,
                per_replicate_seeds: seeds.clone(),
            })
        })
        .collect()
}
