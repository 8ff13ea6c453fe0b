//! Labeled feature tables with per-row provenance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{class_ratio, ClassRatio, Label};
use crate::real::Real;

/// Where a row came from, in terms of row indices of the source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowOrigin {
    Original(usize),
    /// SMOTE interpolation between two original rows.
    Synthetic { base: usize, neighbor: usize },
}

impl RowOrigin {
    /// Source rows this row was derived from.
    pub fn sources(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            RowOrigin::Original(i) => (i, None),
            RowOrigin::Synthetic { base, neighbor } => (base, Some(neighbor)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, RowOrigin::Synthetic { .. })
    }
}

/// Row-major feature matrix with labels. Every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    feature_names: Vec<String>,
    values: Vec<F>,
    labels: Vec<Label>,
    origins: Vec<RowOrigin>,
}

impl<F: Real> Dataset<F> {
    pub fn empty(feature_names: Vec<String>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::data("a dataset needs at least one feature"));
        }
        Ok(Dataset {
            feature_names,
            values: Vec::new(),
            labels: Vec::new(),
            origins: Vec::new(),
        })
    }

    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<F>>, labels: Vec<Label>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::data("row and label counts differ"));
        }
        let mut ds = Self::empty(feature_names)?;
        for (row, label) in rows.iter().zip(labels) {
            ds.push(row, label)?;
        }
        Ok(ds)
    }

    /// Appends an original row, numbered by its position.
    pub fn push(&mut self, row: &[F], label: Label) -> Result<()> {
        let origin = RowOrigin::Original(self.labels.len());
        self.push_with_origin(row, label, origin)
    }

    pub fn push_with_origin(&mut self, row: &[F], label: Label, origin: RowOrigin) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::data(format!(
                "row has {} values, expected {}",
                row.len(),
                self.n_features()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("rows must contain only finite values"));
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        self.origins.push(origin);
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[F] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[F]> {
        self.values.chunks_exact(self.n_features())
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn origins(&self) -> &[RowOrigin] {
        &self.origins
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn class_ratio(&self) -> ClassRatio {
        class_ratio(&self.labels)
    }

    /// Row indices carrying `label`, ascending.
    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Rows at `indices`, in that order, keeping their origins.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let d = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
        }
    }

    /// Appends every row of `other`, keeping origins.
    pub fn extend(&mut self, other: &Dataset<F>) -> Result<()> {
        if other.feature_names != self.feature_names {
            return Err(Error::data("cannot concatenate datasets with different columns"));
        }
        self.values.extend_from_slice(&other.values);
        self.labels.extend_from_slice(&other.labels);
        self.origins.extend_from_slice(&other.origins);
        Ok(())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_index(n)
                    .ok_or_else(|| Error::data(format!("dataset has no column '{n}'")))
            })
            .collect::<Result<_>>()?;
        let mut ds = Dataset::empty(names.iter().map(|s| s.to_string()).collect())?;
        let mut buf = Vec::with_capacity(idx.len());
        for (i, row) in self.rows().enumerate() {
            buf.clear();
            buf.extend(idx.iter().map(|&j| row[j]));
            ds.push_with_origin(&buf, self.labels[i], self.origins[i])?;
        }
        Ok(ds)
    }

    /// Same features with labels replaced.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::data("label count does not match row count"));
        }
        Ok(Dataset {
            labels,
            ..self.clone()
        })
    }

    /// Renumbers every row as an original row.
    pub fn reset_origins(&mut self) {
        self.origins = (0..self.len()).map(RowOrigin::Original).collect();
    }

    /// Fails unless both classes are present.
    pub fn require_both_classes(&self) -> Result<ClassRatio> {
        let r = self.class_ratio();
        if r.ones == 0 || r.zeros == 0 {
            return Err(Error::SingleClass(format!("dataset has {r}")));
        }
        Ok(r)
    }
}
