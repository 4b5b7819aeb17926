//! CSV ingestion of binary covariates and a response column.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::bits::BitVector;
use crate::data::{DataError, Dataset, Family};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("response column {0:?} not found in header")]
    MissingResponse(String),
    #[error("column name {0:?} appears more than once")]
    DuplicateHeader(String),
    #[error("row {row}, column {column:?}: missing value")]
    MissingCell { row: usize, column: String },
    #[error("row {row}, column {column:?}: covariate value {value:?} is not 0 or 1")]
    NonBinaryCovariate { row: usize, column: String, value: String },
    #[error("row {row}, column {column:?}: response value {value:?} is not valid for the {family} family")]
    BadResponse {
        row: usize,
        column: String,
        value: String,
        family: Family,
    },
    #[error("no covariate columns besides the response")]
    NoCovariates,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// An ingested dataset and the covariates dropped as duplicates.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: Dataset<f64>,
    /// `(dropped, kept)` label pairs for covariates identical to an earlier one.
    pub dropped: Vec<(String, String)>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Reads a CSV with a header row. Rows are numbered from 1 after the header.
pub fn read_csv<R: Read>(reader: R, response: &str, family: Family) -> Result<Ingested, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(IngestError::DuplicateHeader(h.clone()));
        }
    }
    let y_col = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| IngestError::MissingResponse(response.to_string()))?;
    let x_cols: Vec<usize> = (0..header.len()).filter(|&j| j != y_col).collect();
    if x_cols.is_empty() {
        return Err(IngestError::NoCovariates);
    }
    let mut bits: Vec<Vec<bool>> = vec![Vec::new(); x_cols.len()];
    let mut y = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                return Err(IngestError::MissingCell {
                    row,
                    column: header[j].clone(),
                });
            }
        }
        let cell = &record[y_col];
        let bad = || IngestError::BadResponse {
            row,
            column: header[y_col].clone(),
            value: cell.to_string(),
            family,
        };
        let v: f64 = cell.parse().map_err(|_| bad())?;
        if !v.is_finite() || (family == Family::Binomial && v != 0.0 && v != 1.0) {
            return Err(bad());
        }
        y.push(v);
        for (col, &j) in bits.iter_mut().zip(&x_cols) {
            col.push(match &record[j] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(IngestError::NonBinaryCovariate {
                        row,
                        column: header[j].clone(),
                        value: other.to_string(),
                    })
                }
            });
        }
    }

    let mut columns: Vec<BitVector> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut dropped = Vec::new();
    for (col, &j) in bits.into_iter().zip(&x_cols) {
        let v = BitVector::from_bools(col);
        if let Some(k) = columns.iter().position(|c| *c == v) {
            log::warn!("covariate {} duplicates {} and was dropped", header[j], labels[k]);
            dropped.push((header[j].clone(), labels[k].clone()));
            continue;
        }
        columns.push(v);
        labels.push(header[j].clone());
    }
    let data = Dataset::with_labels(columns, y, family, labels)?;
    Ok(Ingested { data, dropped })
}

pub fn read_csv_file(path: &Path, response: &str, family: Family) -> Result<Ingested, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(std::io::BufReader::new(file), response, family)
}
