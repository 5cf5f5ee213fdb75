//! Model specification: covariate selection with optional log transforms and
//! the frailty switch.

use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
}

/// One model term: a named dataset column plus its transform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSelector {
    pub column: String,
    pub transform: Transform,
}

impl CovariateSelector {
    pub fn identity(column: impl Into<String>) -> Self {
        CovariateSelector { column: column.into(), transform: Transform::Identity }
    }

    pub fn log(column: impl Into<String>) -> Self {
        CovariateSelector { column: column.into(), transform: Transform::Log }
    }

    /// Parse `name` or `name:log`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.rsplit_once(':') {
            None => Ok(Self::identity(text)),
            Some((name, "log")) => Ok(Self::log(name)),
            Some((_, other)) => {
                Err(Error::Invalid(format!("unknown transform `{other}` (expected `log`)")))
            }
        }
    }

    /// Display name, e.g. `log(x2)`.
    pub fn label(&self) -> String {
        match self.transform {
            Transform::Identity => self.column.clone(),
            Transform::Log => format!("log({})", self.column),
        }
    }

    /// Transformed values of this term for every record.
    pub fn values(&self, dataset: &SurvivalDataset) -> Result<Vec<f64>> {
        let raw = dataset.covariate_column(&self.column)?;
        match self.transform {
            Transform::Identity => Ok(raw),
            Transform::Log => {
                if let Some(pos) = raw.iter().position(|&v| v <= 0.0) {
                    return Err(Error::Invalid(format!(
                        "log transform of `{}` requires strictly positive values; row {} has {}",
                        self.column,
                        pos + 1,
                        raw[pos]
                    )));
                }
                Ok(raw.into_iter().map(f64::ln).collect())
            }
        }
    }
}

/// Which covariates enter the linear predictor, and whether a shared gamma
/// frailty acts on clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub covariates: Vec<CovariateSelector>,
    pub frailty: bool,
}

impl ModelSpec {
    pub fn new(covariates: Vec<CovariateSelector>, frailty: bool) -> Self {
        ModelSpec { covariates, frailty }
    }

    pub fn n_terms(&self) -> usize {
        self.covariates.len()
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.covariates.iter().map(|c| c.label()).collect()
    }

    /// Row-major n×p design matrix, validated against the dataset.
    pub fn design_matrix(&self, dataset: &SurvivalDataset) -> Result<Vec<f64>> {
        let n = dataset.n();
        let p = self.covariates.len();
        let mut x = vec![0.0; n * p];
        for (j, sel) in self.covariates.iter().enumerate() {
            let col = sel.values(dataset)?;
            for (i, v) in col.into_iter().enumerate() {
                x[i * p + j] = v;
            }
        }
        Ok(x)
    }
}
