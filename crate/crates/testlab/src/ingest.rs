//! CSV input: UTF-8, header row, comma separated, '.' decimal point.
//! Rows in error messages count data rows from 1 (the header is not counted).

use std::path::Path;

use dm_testlab_core::family::wrap_angle;
use dm_testlab_core::{DMatrix, DVector, Family};

use crate::error::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Option<DVector<f64>>,
    /// Covariates in the requested column order.
    pub x: DMatrix<f64>,
    pub n: usize,
    pub warnings: Vec<String>,
}

/// Reads `response` (if any) and `covariates` from a CSV file.
pub fn ingest_csv(path: &Path, response: Option<&str>, covariates: &[String]) -> Result<Dataset, IngestError> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: shown.clone(),
        source,
    })?;
    read_csv(file, &shown, response, covariates)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    source_name: &str,
    response: Option<&str>,
    covariates: &[String],
) -> Result<Dataset, IngestError> {
    let fmt_err = |e: csv::Error| IngestError::Format {
        path: source_name.to_string(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(fmt_err)?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let y_col = response.map(|r| find(r).map(|i| (i, r))).transpose()?;
    let x_cols = covariates
        .iter()
        .map(|c| find(c).map(|i| (i, c.as_str())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ys = Vec::new();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(fmt_err)?;
        let cell = |(i, name): (usize, &str)| -> Result<f64, IngestError> {
            let raw = rec.get(i).unwrap_or("");
            if raw.is_empty() {
                return Err(IngestError::Missing {
                    row,
                    column: name.to_string(),
                });
            }
            let v: f64 = raw.parse().map_err(|_| IngestError::Parse {
                row,
                column: name.to_string(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(IngestError::Invalid {
                    row,
                    column: name.to_string(),
                    message: "value is not finite".into(),
                });
            }
            Ok(v)
        };
        if let Some(yc) = y_col {
            ys.push(cell(yc)?);
        }
        xs.push(x_cols.iter().map(|&c| cell(c)).collect::<Result<_, _>>()?);
    }
    let n = xs.len();
    if n == 0 {
        return Err(IngestError::Empty(source_name.to_string()));
    }
    Ok(Dataset {
        y: y_col.map(|_| DVector::from_vec(ys)),
        x: DMatrix::from_fn(n, x_cols.len(), |i, j| xs[i][j]),
        n,
        warnings: Vec::new(),
    })
}

/// Checks responses against the family support. Von Mises angles outside
/// (−π, π] are wrapped, with a warning.
pub fn prepare_response(family: Family, y: &mut DVector<f64>, column: &str, warnings: &mut Vec<String>) -> Result<(), IngestError> {
    let mut wrapped = 0;
    for (k, v) in y.iter_mut().enumerate() {
        if family == Family::VonMises {
            let w = wrap_angle(*v);
            if w != *v {
                wrapped += 1;
                *v = w;
            }
        }
        if !family.y_in_support(*v) {
            return Err(IngestError::Invalid {
                row: k + 1,
                column: column.to_string(),
                message: format!("{v} is outside the {} support", family.name()),
            });
        }
    }
    if wrapped > 0 {
        warnings.push(format!("{wrapped} angle(s) in column {column} wrapped into (-pi, pi]"));
    }
    Ok(())
}
