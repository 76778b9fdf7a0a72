use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Matrix};
use crate::error::{Error, Result};

/// Maps CSV header names onto dataset roles.
///
/// An empty `covariates` list selects every column whose name starts with
/// `x`, which is the layout [`write_dataset`] emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSchema {
    pub covariates: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    pub propensity: Option<String>,
    /// Potential outcome columns in arm order; empty for observational data.
    pub potential_outcomes: Vec<String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            covariates: Vec::new(),
            treatment: "t".into(),
            outcome: "y".into(),
            propensity: None,
            potential_outcomes: Vec::new(),
        }
    }
}

impl ColumnSchema {
    /// Schema for files produced by [`write_dataset`] from simulated data.
    pub fn simulated(m: usize) -> Self {
        Self {
            propensity: Some("e_hat".into()),
            potential_outcomes: (0..m).map(|t| format!("y_{t}")).collect(),
            ..Self::default()
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let cov_idx: Vec<usize> = if schema.covariates.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with('x'))
            .map(|(i, _)| i)
            .collect()
    } else {
        schema
            .covariates
            .iter()
            .map(|c| find(c))
            .collect::<Result<_>>()?
    };
    let t_idx = find(&schema.treatment)?;
    let y_idx = find(&schema.outcome)?;
    let e_idx = schema.propensity.as_deref().map(find).transpose()?;
    let py_idx: Vec<usize> = schema
        .potential_outcomes
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;

    let d = cov_idx.len();
    let mut x = Vec::new();
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut e = Vec::new();
    let mut py = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = r + 2;
        let rec = rec.map_err(|err| Error::Parse {
            row,
            message: err.to_string(),
        })?;
        let real = |col: usize| -> Result<f64> {
            let cell = rec.get(col).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column `{}`: `{cell}` is not a number", &headers[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("column `{}`: non-finite value", &headers[col]),
                });
            }
            Ok(v)
        };
        for &c in &cov_idx {
            x.push(real(c)?);
        }
        let tv = real(t_idx)?;
        if tv < 0.0 || tv.fract() != 0.0 {
            return Err(Error::Parse {
                row,
                message: format!("treatment `{tv}` is not a non-negative integer"),
            });
        }
        t.push(tv as usize);
        y.push(real(y_idx)?);
        if let Some(c) = e_idx {
            e.push(real(c)?);
        }
        for &c in &py_idx {
            py.push(real(c)?);
        }
    }

    let n = t.len();
    let m = t.iter().max().map_or(2, |&mx| (mx + 1).max(2));
    let mut data = Dataset::new(Matrix::new(n, d, x)?, t, y, m)?;
    if e_idx.is_some() {
        data = data.with_propensities(e)?;
    }
    if !py_idx.is_empty() {
        if py_idx.len() != m {
            return Err(Error::domain(format!(
                "{} potential outcome columns for {m} arms",
                py_idx.len()
            )));
        }
        data = data.with_potential_outcomes(Matrix::new(n, m, py)?)?;
    }
    Ok(data)
}

/// Writes `x0..x{d-1},t,y[,e_hat][,y_0..y_{m-1}]` followed by any extra
/// per-unit columns.
pub fn write_dataset<W: Write>(
    data: &Dataset,
    writer: W,
    extra: &[(&str, &[f64])],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.d()).map(|j| format!("x{j}")).collect();
    header.push("t".into());
    header.push("y".into());
    if data.propensities().is_some() {
        header.push("e_hat".into());
    }
    if data.potential_outcomes().is_some() {
        header.extend((0..data.m()).map(|t| format!("y_{t}")));
    }
    for (name, col) in extra {
        if col.len() != data.n() {
            return Err(Error::domain(format!("extra column `{name}` has wrong length")));
        }
        header.push((*name).to_string());
    }
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        rec.push(data.treatments()[i].to_string());
        rec.push(data.outcomes()[i].to_string());
        if let Some(e) = data.propensities() {
            rec.push(e[i].to_string());
        }
        if let Some(py) = data.potential_outcomes() {
            rec.extend(py.row(i).iter().map(f64::to_string));
        }
        for (_, col) in extra {
            rec.push(col[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, schema: &ColumnSchema) -> Result<Dataset> {
        read_dataset(text.as_bytes(), schema)
    }

    #[test]
    fn two_row_file() {
        let data = parse("x0,t,y\n1.0,1,-2\n0.5,0,1\n", &ColumnSchema::default()).unwrap();
        assert_eq!((data.n(), data.d(), data.m()), (2, 1, 2));
        assert_eq!(data.outcomes(), &[-2.0, 1.0]);
        assert_eq!(data.row(1), &[0.5]);
    }

    #[test]
    fn header_only_gives_empty_dataset() {
        let data = parse("x0,t,y\n", &ColumnSchema::default()).unwrap();
        assert_eq!(data.n(), 0);
        assert!(data.arms().require_nonempty().is_err());
    }

    #[test]
    fn max_label_defines_arity() {
        let data = parse("x0,t,y\n1,0,1\n2,3,1\n", &ColumnSchema::default()).unwrap();
        assert_eq!(data.m(), 4);
        assert_eq!(data.warnings().len(), 2);
    }

    #[test]
    fn bad_cell_reports_row() {
        let err = parse("x0,t,y\n1,0,1\n2,1,oops\n", &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        let err = parse("x0,t,y\n1,0,1\n2,1,\n", &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        let err = parse("x0,t,y\n1,-1,1\n", &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn named_columns_and_propensity() {
        let schema = ColumnSchema {
            covariates: vec!["age".into(), "bmi".into()],
            treatment: "arm".into(),
            outcome: "loss".into(),
            propensity: Some("p".into()),
            potential_outcomes: vec![],
        };
        let data = parse(
            "loss,bmi,arm,age,p\n1.5,20,1,40,0.25\n0.5,30,0,50,0.75\n",
            &schema,
        )
        .unwrap();
        assert_eq!(data.row(0), &[40.0, 20.0]);
        assert_eq!(data.propensities().unwrap(), &[0.25, 0.75]);
        let missing = ColumnSchema {
            treatment: "nope".into(),
            ..schema
        };
        assert!(matches!(
            parse("loss,bmi,arm,age,p\n", &missing),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn written_file_reads_back() {
        let x = Matrix::new(2, 2, vec![0.1, -3.0, 1e-17, 2.5]).unwrap();
        let data = Dataset::new(x, vec![1, 0], vec![-0.3, 7.25], 2)
            .unwrap()
            .with_propensities(vec![0.4, 0.9])
            .unwrap()
            .with_potential_outcomes(Matrix::new(2, 2, vec![1.0, -0.3, 7.25, 0.0]).unwrap())
            .unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf, &[("w_true", &[2.0, 1.5])]).unwrap();
        let back = read_dataset(buf.as_slice(), &ColumnSchema::simulated(2)).unwrap();
        assert_eq!(back.x(), data.x());
        assert_eq!(back.outcomes(), data.outcomes());
        assert_eq!(back.propensities(), data.propensities());
        assert_eq!(back.potential_outcomes(), data.potential_outcomes());
    }
}
