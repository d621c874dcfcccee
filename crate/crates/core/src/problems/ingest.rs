use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::fairness::{FairClassificationProblem, FairData};
use crate::error::{Error, Result};
use crate::linalg::kahan_sum;
use crate::rng::{stream_rng, STREAM_SPLIT};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub label_col: String,
    pub sensitive_col: String,
    /// Feature columns; empty means every other column.
    #[serde(default)]
    pub feature_cols: Vec<String>,
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Label value mapped to 1; without it labels must already be 0/1.
    #[serde(default)]
    pub label_positive: Option<String>,
    #[serde(default)]
    pub sensitive_positive: Option<String>,
    #[serde(default = "yes")]
    pub intercept: bool,
}

impl CsvSchema {
    pub fn new(label_col: &str, sensitive_col: &str) -> Self {
        Self {
            label_col: label_col.into(),
            sensitive_col: sensitive_col.into(),
            feature_cols: Vec::new(),
            standardize: true,
            label_positive: None,
            sensitive_positive: None,
            intercept: true,
        }
    }
}

/// Train / validation / test partition of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FairSplit {
    pub train: FairData,
    pub validation: FairData,
    pub test: FairData,
}

impl FairSplit {
    /// Problem over the training rows, with `s_bar` taken from them.
    pub fn train_problem(&self, c: f64, radius: f64) -> Result<FairClassificationProblem> {
        FairClassificationProblem::new(self.train.clone(), c, radius)
    }
}

/// Holds out `test_fraction` of the rows, then `validation_fraction` of the
/// remainder, after a seeded shuffle.
pub fn split_data(
    data: &FairData,
    test_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<FairSplit> {
    for f in [test_fraction, validation_fraction] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::invalid(format!("split fraction {f} must lie in [0, 1)")));
        }
    }
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, STREAM_SPLIT));
    let n_test = (test_fraction * n as f64).round() as usize;
    let rest = n - n_test;
    let n_val = (validation_fraction * rest as f64).round() as usize;
    let n_train = rest - n_val;
    if n_train == 0 || n_test == 0 {
        return Err(Error::Data(format!("{n} rows are too few to split")));
    }
    Ok(FairSplit {
        train: data.subset(&idx[..n_train]),
        validation: data.subset(&idx[n_train..rest]),
        test: data.subset(&idx[rest..]),
    })
}

/// Reads a CSV and applies the schema: numeric columns pass through,
/// non-numeric ones are one-hot encoded, then optional z-scoring and an
/// intercept column.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<FairData> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let position: HashMap<&str, usize> =
        headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    let feature_cols: Vec<String> = if schema.feature_cols.is_empty() {
        headers
            .iter()
            .filter(|h| **h != schema.label_col && **h != schema.sensitive_col)
            .cloned()
            .collect()
    } else {
        schema.feature_cols.clone()
    };
    let missing: Vec<&str> = [&schema.label_col, &schema.sensitive_col]
        .into_iter()
        .chain(&feature_cols)
        .filter(|c| !position.contains_key(c.as_str()))
        .map(|c| c.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "missing columns {missing:?}; file has {headers:?}"
        )));
    }
    if feature_cols.is_empty() {
        return Err(Error::Data("no feature columns".into()));
    }

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {} has {} fields, expected {}",
                row + 1,
                rec.len(),
                headers.len()
            )));
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    let column = |name: &str| -> Vec<String> {
        let j = position[name];
        records.iter().map(|r| r[j].trim().to_string()).collect()
    };

    let labels = binary_column(&column(&schema.label_col), &schema.label_col, schema.label_positive.as_deref())?;
    let sensitive = binary_column(
        &column(&schema.sensitive_col),
        &schema.sensitive_col,
        schema.sensitive_positive.as_deref(),
    )?;

    let n = records.len();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for name in &feature_cols {
        let raw = column(name);
        let parsed: Option<Vec<f64>> = raw.iter().map(|v| v.parse::<f64>().ok()).collect();
        match parsed {
            Some(values) => columns.push((name.clone(), values)),
            None => {
                let levels: BTreeSet<&str> = raw.iter().map(|s| s.as_str()).collect();
                for level in levels {
                    columns.push((
                        format!("{name}={level}"),
                        raw.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect(),
                    ));
                }
            }
        }
    }
    if schema.standardize {
        for (_, values) in columns.iter_mut() {
            standardize(values);
        }
    }
    if schema.intercept {
        columns.push(("intercept".into(), vec![1.0; n]));
    }

    let width = columns.len();
    let mut features = vec![0.0; n * width];
    for (j, (_, values)) in columns.iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            features[i * width + j] = *v;
        }
    }
    let names = columns.into_iter().map(|(name, _)| name).collect();
    FairData::new(features, width, labels, sensitive, names)
}

/// [`load_csv`] followed by the 70/30 split with a 10% validation carve-out of
/// the training part.
pub fn ingest_csv(path: &Path, schema: &CsvSchema, seed: u64) -> Result<FairSplit> {
    split_data(&load_csv(path, schema)?, 0.3, 0.1, seed)
}

fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = kahan_sum(values.iter().copied()) / n;
    values.iter_mut().for_each(|v| *v -= mean);
    let var = kahan_sum(values.iter().map(|v| v * v)) / n;
    if var > 0.0 {
        let sd = var.sqrt();
        values.iter_mut().for_each(|v| *v /= sd);
    }
}

fn binary_column(raw: &[String], name: &str, positive: Option<&str>) -> Result<Vec<f64>> {
    let mut bad = Vec::new();
    let mut out = Vec::with_capacity(raw.len());
    match positive {
        Some(pos) => {
            let mut other: Option<&str> = None;
            for (i, v) in raw.iter().enumerate() {
                if v == pos {
                    out.push(1.0);
                } else if other.is_none() || other == Some(v.as_str()) {
                    other = Some(v);
                    out.push(0.0);
                } else {
                    bad.push(i + 1);
                }
            }
        }
        None => {
            for (i, v) in raw.iter().enumerate() {
                match v.parse::<f64>() {
                    Ok(x) if x == 0.0 || x == 1.0 => out.push(x),
                    _ => bad.push(i + 1),
                }
            }
        }
    }
    if bad.is_empty() {
        return Ok(out);
    }
    let shown: Vec<String> = bad.iter().take(10).map(|r| r.to_string()).collect();
    Err(Error::Data(format!(
        "column {name} is not binary at {} row(s): {}{}",
        bad.len(),
        shown.join(", "),
        if bad.len() > 10 { ", ..." } else { "" }
    )))
}
