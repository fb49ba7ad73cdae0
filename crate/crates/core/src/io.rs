//! Delimited-file ingestion and export of datasets.
//!
//! Files carry a header row. One named column is the binary outcome; every
//! other column is a predictor, kept in file order. A column is binary when
//! its observed values all lie in {0, 1}, continuous otherwise. Cells equal
//! to the missing token are unobserved.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_MISSING_TOKEN: &str = "NA";

pub fn load_csv(path: impl AsRef<Path>, missing_token: &str, outcome_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), missing_token, outcome_column)
}

/// Parses CSV text from any reader.
pub fn read_csv<R: Read>(reader: R, missing_token: &str, outcome_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    for (c, name) in headers.iter().enumerate() {
        if headers[..c].contains(name) {
            return Err(Error::Parse {
                line: 1,
                message: format!("duplicate column `{name}`"),
            });
        }
    }
    let outcome_idx = headers
        .iter()
        .position(|h| h == outcome_column)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("outcome column `{outcome_column}` not in header"),
        })?;
    let predictor_idx: Vec<usize> = (0..headers.len()).filter(|&c| c != outcome_idx).collect();
    let p = predictor_idx.len();

    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut outcome = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("{} fields, header has {}", record.len(), headers.len()),
            });
        }
        let y = &record[outcome_idx];
        if y == missing_token {
            return Err(Error::Parse {
                line,
                message: "outcome is missing".into(),
            });
        }
        match y.parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => outcome.push(v),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("outcome `{y}` is not 0 or 1"),
                })
            }
        }
        for &c in &predictor_idx {
            let cell = &record[c];
            if cell == missing_token {
                values.push(f64::NAN);
                mask.push(false);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: cannot parse `{cell}`", headers[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{}`: non-finite value `{cell}`", headers[c]),
                });
            }
            values.push(v);
            mask.push(true);
        }
    }

    let n = outcome.len();
    let columns = predictor_idx
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let binary = (0..n)
                .filter(|&i| mask[i * p + j])
                .all(|i| values[i * p + j] == 0.0 || values[i * p + j] == 1.0);
            let kind = if binary {
                ColumnKind::Binary
            } else {
                ColumnKind::Continuous
            };
            Column::new(headers[c].clone(), kind)
        })
        .collect();
    let outcome_mask = vec![true; n];
    Dataset::new(columns, outcome_column, values, mask, outcome, outcome_mask)
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(dataset, &mut w, missing_token)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes predictors in column order followed by the outcome. Masked
/// outcomes are written as the missing token.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W, missing_token: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.columns().iter().map(|c| c.name.as_str()).collect();
    header.push(dataset.outcome_name());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..dataset.nrows() {
        record.clear();
        for j in 0..dataset.ncols() {
            record.push(match dataset.value(i, j) {
                Some(v) => v.to_string(),
                None => missing_token.to_owned(),
            });
        }
        record.push(if dataset.outcome_mask()[i] {
            dataset.outcome()[i].to_string()
        } else {
            missing_token.to_owned()
        });
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
