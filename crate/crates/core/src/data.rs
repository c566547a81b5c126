//! Records, datasets and weight vectors.
//!
//! Binary problems store the label `+1` as class `1` and `-1` as class `0`.
//! Positive-unlabeled samples use the same encoding: class `1` marks a
//! labeled positive and class `0` an unlabeled record.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: Option<usize>,
    pub stratum: Option<usize>,
    /// Observed duration `min(Y, C)` for survival data.
    pub time: Option<f64>,
    /// `true` when the duration is uncensored.
    pub event: Option<bool>,
}

impl Record {
    pub fn new(features: Vec<f64>) -> Self {
        Record { features, label: None, stratum: None, time: None, event: None }
    }

    pub fn labeled(features: Vec<f64>, label: usize) -> Self {
        Record { label: Some(label), ..Record::new(features) }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_stratum(mut self, stratum: usize) -> Self {
        self.stratum = Some(stratum);
        self
    }

    pub fn with_survival(mut self, time: f64, event: bool) -> Self {
        self.time = Some(time);
        self.event = Some(event);
        self
    }

    /// Label in the `{-1, +1}` convention. Only meaningful for binary data.
    pub fn sign(&self) -> Option<f64> {
        self.label.map(|y| if y == 1 { 1.0 } else { -1.0 })
    }
}

/// A nonempty, schema-consistent collection of records.
///
/// Every record has the same feature length `d`, and each optional field is
/// either present on all records or absent on all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<Record>,
    d: usize,
    n_classes: Option<usize>,
    n_strata: Option<usize>,
}

impl Dataset {
    /// Builds a dataset, inferring the class count `J` and stratum count `K`
    /// from the largest ids present. Binary data with only one class present
    /// still get `J = 2`.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let n_classes = records.iter().filter_map(|r| r.label).max().map(|m| (m + 1).max(2));
        let n_strata = records.iter().filter_map(|r| r.stratum).max().map(|m| m + 1);
        Self::with_counts(records, n_classes, n_strata)
    }

    /// Builds a dataset with explicit class and stratum counts, so that
    /// classes or strata absent from a sample are still accounted for.
    pub fn with_counts(records: Vec<Record>, n_classes: Option<usize>, n_strata: Option<usize>) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::validation("dataset must contain at least one record"))?;
        let d = first.features.len();
        let has_label = first.label.is_some();
        let has_stratum = first.stratum.is_some();
        let has_time = first.time.is_some();
        let has_event = first.event.is_some();
        if has_label && n_classes.is_none() {
            return Err(Error::schema("labels present but class count missing"));
        }
        if has_stratum && n_strata.is_none() {
            return Err(Error::schema("strata present but stratum count missing"));
        }
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != d {
                return Err(Error::schema(format!("record {i} has {} features, expected {d}", r.features.len())));
            }
            if r.label.is_some() != has_label
                || r.stratum.is_some() != has_stratum
                || r.time.is_some() != has_time
                || r.event.is_some() != has_event
            {
                return Err(Error::schema(format!("record {i} does not have the same optional fields as record 0")));
            }
            if let (Some(y), Some(j)) = (r.label, n_classes) {
                if y >= j {
                    return Err(Error::schema(format!("record {i}: label {y} >= J = {j}")));
                }
            }
            if let (Some(s), Some(k)) = (r.stratum, n_strata) {
                if s >= k {
                    return Err(Error::schema(format!("record {i}: stratum {s} >= K = {k}")));
                }
            }
            if let Some(t) = r.time {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::schema(format!("record {i}: time must be finite and nonnegative, got {t}")));
                }
            }
        }
        Ok(Dataset {
            records,
            d,
            n_classes: n_classes.filter(|_| has_label),
            n_strata: n_strata.filter(|_| has_stratum),
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Always false: a dataset holds at least one record.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.n_classes
    }

    pub fn n_strata(&self) -> Option<usize> {
        self.n_strata
    }

    pub fn has_labels(&self) -> bool {
        self.n_classes.is_some()
    }

    pub fn has_strata(&self) -> bool {
        self.n_strata.is_some()
    }

    pub fn has_survival(&self) -> bool {
        self.records[0].time.is_some() && self.records[0].event.is_some()
    }

    pub fn labels(&self) -> Result<Vec<usize>> {
        self.records
            .iter()
            .map(|r| r.label)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::schema("dataset has no labels"))
    }

    pub fn strata(&self) -> Result<Vec<usize>> {
        self.records
            .iter()
            .map(|r| r.stratum)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::schema("dataset has no strata"))
    }

    /// `n'_j` for every class `j`.
    pub fn class_counts(&self) -> Result<Vec<usize>> {
        let j = self.n_classes.ok_or_else(|| Error::schema("dataset has no labels"))?;
        let mut counts = vec![0; j];
        for y in self.labels()? {
            counts[y] += 1;
        }
        Ok(counts)
    }

    /// `n'_k` for every stratum `k`.
    pub fn stratum_counts(&self) -> Result<Vec<usize>> {
        let k = self.n_strata.ok_or_else(|| Error::schema("dataset has no strata"))?;
        let mut counts = vec![0; k];
        for s in self.strata()? {
            counts[s] += 1;
        }
        Ok(counts)
    }

    /// Binary counts `(n'_+, n'_-)`.
    pub fn binary_counts(&self) -> Result<(usize, usize)> {
        match self.n_classes {
            Some(2) => {
                let c = self.class_counts()?;
                Ok((c[1], c[0]))
            }
            Some(j) => Err(Error::schema(format!("expected binary labels, J = {j}"))),
            None => Err(Error::schema("dataset has no labels")),
        }
    }

    /// Records at the given indices, keeping `J` and `K`.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Dataset::with_counts(records, self.n_classes, self.n_strata)
    }

    /// Repeats record `i` `counts[i]` times, in record order.
    pub fn replicate(&self, counts: &[usize]) -> Result<Dataset> {
        if counts.len() != self.len() {
            return Err(Error::schema("replication counts must match the record count"));
        }
        let records = self.records.iter().zip(counts).flat_map(|(r, &c)| std::iter::repeat_n(r.clone(), c)).collect();
        Dataset::with_counts(records, self.n_classes, self.n_strata)
    }
}

/// Nonnegative, finite per-record importance weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::validation(format!("weight {i} is {w}; weights must be finite and nonnegative")));
        }
        Ok(WeightVector(weights))
    }

    pub fn ones(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn subset(&self, indices: &[usize]) -> WeightVector {
        WeightVector(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}
