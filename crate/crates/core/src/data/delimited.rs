use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{ColumnNames, Dataset};
use crate::error::{Error, Result};

/// Which columns act as covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateColumns {
    /// Every column other than the response and exposure, in file order.
    Rest,
    Named(Vec<String>),
}

/// Column-role map for [`read_delimited`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub y: String,
    pub a: String,
    pub x: CovariateColumns,
    #[serde(default)]
    pub intercept: bool,
}

impl Schema {
    pub fn new(y: impl Into<String>, a: impl Into<String>) -> Self {
        Schema {
            y: y.into(),
            a: a.into(),
            x: CovariateColumns::Rest,
            intercept: false,
        }
    }
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        row: 0,
        column: name.to_string(),
        message: "column not found in header".into(),
    })
}

/// Reads a comma-separated file with a header row. Row numbers in errors
/// count data rows from 1.
pub fn read_delimited(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let yi = column_index(&headers, &schema.y)?;
    let ai = column_index(&headers, &schema.a)?;
    let xi: Vec<usize> = match &schema.x {
        CovariateColumns::Rest => (0..headers.len()).filter(|&j| j != yi && j != ai).collect(),
        CovariateColumns::Named(names) => names
            .iter()
            .map(|name| column_index(&headers, name))
            .collect::<Result<_>>()?,
    };
    if xi.is_empty() {
        return Err(Error::InvalidArgument("schema selects no covariate columns".into()));
    }

    let mut y = Vec::new();
    let mut a = Vec::new();
    let mut x = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let cell = |j: usize| -> Result<f64> {
            let raw = &record[j];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: format!("`{raw}` is not a finite number"),
                }),
            }
        };
        let yv = cell(yi)?;
        if yv != 0.0 && yv != 1.0 {
            return Err(Error::Parse {
                row,
                column: headers[yi].clone(),
                message: format!("response must be 0 or 1, found {yv}"),
            });
        }
        y.push(yv);
        a.push(cell(ai)?);
        for &j in &xi {
            x.push(cell(j)?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidData("file has no data rows".into()));
    }
    let x = Array2::from_shape_vec((n, xi.len()), x).expect("row-major covariate buffer");
    let d = Dataset {
        y: Array1::from(y),
        a: Array1::from(a),
        x,
        has_intercept: false,
        names: ColumnNames {
            y: schema.y.clone(),
            a: schema.a.clone(),
            x: xi.iter().map(|&j| headers[j].clone()).collect(),
        },
    };
    d.validate()?;
    Ok(if schema.intercept { d.with_intercept() } else { d })
}

/// Writes response, exposure and covariates (intercept column omitted).
pub fn write_delimited(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    let skip = usize::from(d.has_intercept);
    let mut header = vec![d.names.y.clone(), d.names.a.clone()];
    header.extend(d.names.x[skip..].iter().cloned());
    w.write_record(&header).map_err(to_err)?;
    for i in 0..d.n() {
        let mut rec = vec![d.y[i].to_string(), d.a[i].to_string()];
        rec.extend(d.x.row(i).iter().skip(skip).map(f64::to_string));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
