//! Binary covariate data with a response vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitVector;
use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("need at least 2 observations, got {0}")]
    TooFewRows(usize),
    #[error("covariate column {column} has {got} entries, expected {n}")]
    ColumnLength { column: usize, got: usize, n: usize },
    #[error("{labels} labels for {m} covariates")]
    LabelCount { labels: usize, m: usize },
    #[error("binomial response at row {row} is {value}, expected 0 or 1")]
    NonBinaryResponse { row: usize, value: f64 },
    #[error("response at row {row} is not finite")]
    NonFiniteResponse { row: usize },
    #[error("unknown family {0:?}, expected gaussian or binomial")]
    UnknownFamily(String),
}

/// Response distribution and link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Identity link, normal errors.
    Gaussian,
    /// Logit link, Bernoulli responses.
    Binomial,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        })
    }
}

impl FromStr for Family {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            _ => Err(DataError::UnknownFamily(s.to_string())),
        }
    }
}

/// `n` observations of `m` binary covariates, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    columns: Vec<BitVector>,
    y: Vec<T>,
    family: Family,
    labels: Vec<String>,
}

impl<T: Real> Dataset<T> {
    pub fn new(columns: Vec<BitVector>, y: Vec<T>, family: Family) -> Result<Self, DataError> {
        let labels = (1..=columns.len()).map(|j| format!("X{j}")).collect();
        Self::with_labels(columns, y, family, labels)
    }

    pub fn with_labels(
        columns: Vec<BitVector>,
        y: Vec<T>,
        family: Family,
        labels: Vec<String>,
    ) -> Result<Self, DataError> {
        let n = y.len();
        if n < 2 {
            return Err(DataError::TooFewRows(n));
        }
        if let Some((column, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(DataError::ColumnLength {
                column,
                got: c.len(),
                n,
            });
        }
        if labels.len() != columns.len() {
            return Err(DataError::LabelCount {
                labels: labels.len(),
                m: columns.len(),
            });
        }
        for (row, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFiniteResponse { row });
            }
            if family == Family::Binomial && v != T::zero() && v != T::one() {
                return Err(DataError::NonBinaryResponse {
                    row,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            columns,
            y,
            family,
            labels,
        })
    }

    /// Builds a dataset from row-major boolean rows.
    pub fn from_rows(rows: &[Vec<bool>], y: Vec<T>, family: Family) -> Result<Self, DataError> {
        let m = rows.first().map_or(0, Vec::len);
        let columns = (0..m).map(|j| BitVector::from_bools(rows.iter().map(|r| r[j]))).collect();
        Self::new(columns, y, family)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[BitVector] {
        &self.columns
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        self.columns.iter().map(|c| c.get(i)).collect()
    }
}
