//! Labeled uncertainty data ingest and class-probability estimation.
//!
//! The single ingest format is UTF-8 CSV with header `u1,...,ud,label`.
//! String labels are mapped to dense integer class ids in first-appearance
//! order, which keeps runs deterministic.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Uncertainty sample points with integer class labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Ordered distinct class ids (first-appearance order of the raw labels).
    pub class_ids: Vec<usize>,
    /// Raw label text per class id, for reporting.
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let mut class_ids = Vec::new();
        for &l in &labels {
            if !class_ids.contains(&l) {
                class_ids.push(l);
            }
        }
        let class_names = class_ids.iter().map(|c| c.to_string()).collect();
        let ds = LabeledDataset { dim, points, labels, class_ids, class_names };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Invalid("dataset has no points".into()));
        }
        if self.points.len() != self.labels.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} labels",
                self.points.len(),
                self.labels.len()
            )));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != self.dim {
                return Err(Error::Dimension(format!(
                    "point {i} has dimension {}, expected {}",
                    p.len(),
                    self.dim
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("point {i} has a non-finite entry")));
            }
        }
        for (i, l) in self.labels.iter().enumerate() {
            if !self.class_ids.contains(l) {
                return Err(Error::Invalid(format!("label of row {i} not in class_ids")));
            }
        }
        for c in &self.class_ids {
            if !self.labels.contains(c) {
                return Err(Error::Invalid(format!("class {c} has no points")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points belonging to one class, in row order.
    pub fn class_points(&self, class_id: usize) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == class_id)
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Per-coordinate mean over all points.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in &self.points {
            for (mi, v) in m.iter_mut().zip(p) {
                *mi += v;
            }
        }
        let n = self.points.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Collapse all labels into a single class (feeds the single-class reduction).
    pub fn merged(&self) -> LabeledDataset {
        LabeledDataset {
            dim: self.dim,
            points: self.points.clone(),
            labels: vec![0; self.points.len()],
            class_ids: vec![0],
            class_names: vec!["merged".to_string()],
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("u{i}")).collect();
        header.push("label".to_string());
        w.write_record(&header).map_err(csv_err)?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            let mut rec: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            let name = self
                .class_ids
                .iter()
                .position(|c| c == l)
                .map(|idx| self.class_names[idx].clone())
                .unwrap_or_else(|| l.to_string());
            rec.push(name);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv write failed: {e}"))
}

/// Class occurrence probabilities, keyed by class id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub probabilities: BTreeMap<usize, f64>,
}

impl ClassDistribution {
    pub fn prob(&self, class_id: usize) -> f64 {
        self.probabilities.get(&class_id).copied().unwrap_or(0.0)
    }
}

/// Load a labeled dataset from CSV. Header row names the value columns and
/// one `label` column; row numbers in errors are 1-based data rows.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse { row: 0, msg: format!("cannot open {}: {e}", path.display()) })?;

    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 0, msg: format!("bad header: {e}") })?
        .clone();
    let label_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("label"))
        .ok_or_else(|| Error::Parse { row: 0, msg: "missing label column".into() })?;
    let value_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != label_col).collect();
    let dim = value_cols.len();
    if dim == 0 {
        return Err(Error::Parse { row: 0, msg: "no value columns".into() });
    }

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: Vec<usize> = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| Error::Parse { row, msg: format!("malformed row: {e}") })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, got {}", headers.len(), rec.len()),
            });
        }
        let mut p = Vec::with_capacity(dim);
        for &c in &value_cols {
            let v: f64 = rec[c]
                .parse()
                .map_err(|_| Error::Parse { row, msg: format!("bad number '{}'", &rec[c]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, msg: format!("non-finite value '{}'", &rec[c]) });
            }
            p.push(v);
        }
        let name = rec[label_col].to_string();
        let id = match class_names.iter().position(|n| *n == name) {
            Some(i) => class_ids[i],
            None => {
                let id = class_ids.len();
                class_ids.push(id);
                class_names.push(name);
                id
            }
        };
        points.push(p);
        labels.push(id);
    }
    if points.is_empty() {
        return Err(Error::Parse { row: 0, msg: "empty file".into() });
    }
    let ds = LabeledDataset { dim, points, labels, class_ids, class_names };
    ds.validate()?;
    Ok(ds)
}

/// Maximum-likelihood class probabilities: count(class) / L.
pub fn estimate_class_probabilities(ds: &LabeledDataset) -> ClassDistribution {
    let total = ds.labels.len() as f64;
    let mut probabilities = BTreeMap::new();
    for &c in &ds.class_ids {
        let count = ds.labels.iter().filter(|&&l| l == c).count() as f64;
        probabilities.insert(c, count / total);
    }
    ClassDistribution { probabilities }
}
