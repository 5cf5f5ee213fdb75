//! Clustered right-censored survival datasets: validation, CSV ingestion,
//! and summaries.
//!
//! A dataset is immutable after construction and safe to share across
//! threads. Cluster identifiers are arbitrary strings; they are remapped
//! internally to contiguous indices in order of first appearance, and the
//! raw labels are retained for reporting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One follow-up record: time on study, event indicator, cluster label, and
/// the raw covariate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    /// Follow-up time; strictly positive and finite.
    pub time: f64,
    /// `true` = event observed, `false` = right-censored.
    pub status: bool,
    /// Raw cluster identifier.
    pub cluster: String,
    /// Covariate row, aligned with the dataset's `covariate_names`.
    pub covariates: Vec<f64>,
}

/// A validated collection of [`SurvivalRecord`]s.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
    covariate_names: Vec<String>,
    cluster_labels: Vec<String>,
    cluster_of: Vec<usize>,
    n_per_cluster: Vec<usize>,
}

impl SurvivalDataset {
    /// Validate records and build the contiguous cluster index.
    pub fn new(records: Vec<SurvivalRecord>, covariate_names: Vec<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Invalid("dataset has no records".into()));
        }
        let p = covariate_names.len();
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            if !(r.time > 0.0 && r.time.is_finite()) {
                return Err(Error::Row {
                    row,
                    msg: format!("time must be positive and finite, got {}", r.time),
                });
            }
            if r.covariates.len() != p {
                return Err(Error::Row {
                    row,
                    msg: format!("expected {p} covariates, got {}", r.covariates.len()),
                });
            }
            if r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::Row { row, msg: "non-finite covariate value".into() });
            }
        }
        if !records.iter().any(|r| r.status) {
            return Err(Error::Invalid("dataset has no events; fitting is undefined".into()));
        }

        let mut cluster_labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut cluster_of = Vec::with_capacity(records.len());
        for r in &records {
            let id = match index.get(&r.cluster) {
                Some(&i) => i,
                None => {
                    let i = cluster_labels.len();
                    cluster_labels.push(r.cluster.clone());
                    index.insert(r.cluster.clone(), i);
                    i
                }
            };
            cluster_of.push(id);
        }
        let mut n_per_cluster = vec![0usize; cluster_labels.len()];
        for &c in &cluster_of {
            n_per_cluster[c] += 1;
        }

        Ok(SurvivalDataset { records, covariate_names, cluster_labels, cluster_of, n_per_cluster })
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Number of clusters g.
    pub fn n_clusters(&self) -> usize {
        self.cluster_labels.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Cluster labels in contiguous internal order.
    pub fn cluster_labels(&self) -> &[String] {
        &self.cluster_labels
    }

    /// Contiguous cluster index of each record.
    pub fn cluster_indices(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn n_per_cluster(&self) -> &[usize] {
        &self.n_per_cluster
    }

    pub fn censoring_rate(&self) -> f64 {
        let censored = self.records.iter().filter(|r| !r.status).count();
        censored as f64 / self.n() as f64
    }

    /// Position of a named covariate column.
    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(format!("no covariate column named `{name}`")))
    }

    /// Values of one covariate column.
    pub fn covariate_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.covariate_index(name)?;
        Ok(self.records.iter().map(|r| r.covariates[idx]).collect())
    }
}

/// Column-name mapping for [`load_csv`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time: String,
    pub status: String,
    pub cluster: String,
    /// Covariate columns in model order; `None` takes every remaining
    /// header column in file order.
    pub covariates: Option<Vec<String>>,
}

impl CsvSchema {
    /// The schema written by [`save_csv`].
    pub fn canonical() -> Self {
        CsvSchema {
            time: "time".into(),
            status: "status".into(),
            cluster: "cluster".into(),
            covariates: None,
        }
    }
}

/// Load a dataset from a delimited text file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;

    let headers: Vec<String> =
        reader.headers().map_err(|e| Error::Schema(e.to_string()))?.iter().map(String::from).collect();

    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}` in {}", path.display())))
    };
    let time_idx = find(&schema.time)?;
    let status_idx = find(&schema.status)?;
    let cluster_idx = find(&schema.cluster)?;

    let covariate_names: Vec<String> = match &schema.covariates {
        Some(names) => {
            for n in names {
                find(n)?;
            }
            names.clone()
        }
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != time_idx && *i != status_idx && *i != cluster_idx)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let covariate_idx: Vec<usize> =
        covariate_names.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::Row { row: row_no, msg: e.to_string() })?;
        let field = |idx: usize| -> Result<&str> {
            row.get(idx).ok_or_else(|| Error::Row { row: row_no, msg: "short row".into() })
        };

        let time: f64 = field(time_idx)?
            .trim()
            .parse()
            .map_err(|_| Error::Row { row: row_no, msg: format!("non-numeric time `{}`", field(time_idx).unwrap_or("")) })?;
        if !(time > 0.0 && time.is_finite()) {
            return Err(Error::Row { row: row_no, msg: format!("time must be positive, got {time}") });
        }
        let status = match field(status_idx)?.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Row { row: row_no, msg: format!("status must be 0 or 1, got `{other}`") })
            }
        };
        let cluster = field(cluster_idx)?.to_string();
        let mut covariates = Vec::with_capacity(covariate_idx.len());
        for (&ci, name) in covariate_idx.iter().zip(&covariate_names) {
            let v: f64 = field(ci)?.trim().parse().map_err(|_| Error::Row {
                row: row_no,
                msg: format!("non-numeric value for `{name}`"),
            })?;
            covariates.push(v);
        }
        records.push(SurvivalRecord { time, status, cluster, covariates });
    }

    SurvivalDataset::new(records, covariate_names)
}

/// Write a dataset with the canonical header `time,status,cluster,<covariates...>`.
///
/// Reloading through [`load_csv`] with [`CsvSchema::canonical`] is the
/// identity on every field.
pub fn save_csv(dataset: &SurvivalDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Invalid(format!("{other:?}")),
    })?;

    let mut header = vec!["time".to_string(), "status".into(), "cluster".into()];
    header.extend(dataset.covariate_names.iter().cloned());
    writer.write_record(&header).map_err(|e| Error::Invalid(e.to_string()))?;

    let mut buf = String::new();
    for r in &dataset.records {
        let mut row: Vec<String> = Vec::with_capacity(3 + r.covariates.len());
        buf.clear();
        write!(buf, "{}", r.time).unwrap();
        row.push(buf.clone());
        row.push(if r.status { "1".into() } else { "0".into() });
        row.push(r.cluster.clone());
        for v in &r.covariates {
            buf.clear();
            write!(buf, "{v}").unwrap();
            row.push(buf.clone());
        }
        writer.write_record(&row).map_err(|e| Error::Invalid(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Per-covariate range and mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariateSummary {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Dataset-level summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub n_clusters: usize,
    pub n_per_cluster: Vec<usize>,
    pub n_events: usize,
    pub censoring_rate: f64,
    pub covariates: Vec<CovariateSummary>,
}

/// Summarize cluster structure, censoring rate, and covariate ranges.
pub fn summarize(dataset: &SurvivalDataset) -> DatasetSummary {
    let n = dataset.n();
    let n_events = dataset.records.iter().filter(|r| r.status).count();
    let covariates = dataset
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for r in &dataset.records {
                let v = r.covariates[j];
                min = min.min(v);
                max = max.max(v);
                sum += v;
            }
            CovariateSummary { name: name.clone(), min, max, mean: sum / n as f64 }
        })
        .collect();
    DatasetSummary {
        n,
        n_clusters: dataset.n_clusters(),
        n_per_cluster: dataset.n_per_cluster.clone(),
        n_events,
        censoring_rate: (n - n_events) as f64 / n as f64,
        covariates,
    }
}
