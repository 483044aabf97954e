use std::fs::File;
use std::path::Path;

use crate::error::{Result, XbcfError};
use crate::model::{Dataset, Matrix};
use crate::scalar::Scalar;
use crate::xbcf::CateSummary;

/// Which columns of a CSV file play which role.
#[derive(Clone, Debug)]
pub struct CsvSpec {
    pub outcome: String,
    pub treatment: String,
    pub propensity: Option<String>,
    /// Columns dropped entirely (e.g. ground-truth columns of simulated data).
    pub ignore: Vec<String>,
    pub delimiter: u8,
}

impl CsvSpec {
    pub fn new(outcome: impl Into<String>, treatment: impl Into<String>) -> Self {
        CsvSpec {
            outcome: outcome.into(),
            treatment: treatment.into(),
            propensity: None,
            ignore: Vec::new(),
            delimiter: b',',
        }
    }
}

/// A numeric table with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table<T> {
    pub header: Vec<String>,
    pub columns: Vec<Vec<T>>,
}

impl<T: Scalar> Table<T> {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<&[T]> {
        self.position(name).map(|j| self.columns[j].as_slice())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> XbcfError + '_ {
    move |source| XbcfError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> XbcfError {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => XbcfError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => XbcfError::Parse {
            path: path.to_path_buf(),
            row,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

/// Reads a header row followed by numeric rows. Row numbers in errors are
/// file line numbers (the header is line 1).
pub fn read_table<T: Scalar>(path: &Path, delimiter: u8) -> Result<Table<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(XbcfError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: String::new(),
            message: "missing header row".into(),
        });
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        for (j, cell) in record.iter().enumerate() {
            let parse_error = |message: String| XbcfError::Parse {
                path: path.to_path_buf(),
                row: line,
                column: header[j].clone(),
                message,
            };
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(format!("'{cell}' is not finite")));
            }
            columns[j].push(T::lit(v));
        }
    }
    Ok(Table { header, columns })
}

/// [`load_csv_with`] for a comma-separated file with nothing ignored.
pub fn load_csv<T: Scalar>(
    path: &Path,
    outcome_col: &str,
    treatment_col: &str,
    propensity_col: Option<&str>,
) -> Result<Dataset<T>> {
    let mut spec = CsvSpec::new(outcome_col, treatment_col);
    spec.propensity = propensity_col.map(str::to_string);
    load_csv_with(path, &spec)
}

/// Loads a dataset. Every column that is not the outcome, treatment,
/// propensity or ignored becomes a covariate, in header order.
pub fn load_csv_with<T: Scalar>(path: &Path, spec: &CsvSpec) -> Result<Dataset<T>> {
    let table = read_table::<T>(path, spec.delimiter)?;
    let find = |name: &str| {
        table.position(name).ok_or_else(|| XbcfError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: name.to_string(),
            message: "column not found in header".into(),
        })
    };
    let y_col = find(&spec.outcome)?;
    let z_col = find(&spec.treatment)?;
    let pi_col = spec.propensity.as_deref().map(find).transpose()?;
    for name in &spec.ignore {
        find(name)?;
    }

    let mut z = Vec::with_capacity(table.n_rows());
    for (i, &v) in table.columns[z_col].iter().enumerate() {
        if v == T::zero() {
            z.push(0);
        } else if v == T::one() {
            z.push(1);
        } else {
            return Err(XbcfError::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                column: spec.treatment.clone(),
                message: format!("treatment must be 0 or 1, found {v}"),
            });
        }
    }
    if let Some(p) = pi_col {
        if let Some(i) = table.columns[p].iter().position(|&v| !(v > T::zero() && v < T::one())) {
            return Err(XbcfError::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                column: table.header[p].clone(),
                message: "propensity must lie strictly between 0 and 1".into(),
            });
        }
    }

    let x_cols: Vec<Vec<T>> = (0..table.header.len())
        .filter(|&j| j != y_col && j != z_col && Some(j) != pi_col)
        .filter(|&j| !spec.ignore.contains(&table.header[j]))
        .map(|j| table.columns[j].clone())
        .collect();
    let x = if x_cols.is_empty() {
        Matrix::from_rows(&vec![Vec::new(); table.n_rows()])?
    } else {
        Matrix::from_columns(x_cols)?
    };
    Dataset::new(
        table.columns[y_col].clone(),
        z,
        x,
        pi_col.map(|p| table.columns[p].clone()),
    )
}

/// Writes a header and rows of already-formatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// CATE table text: `row_id,cate_mean,cate_lo,cate_hi`, floats in shortest
/// round-trip form.
pub fn cate_table_text<T: Scalar>(summary: &CateSummary<T>) -> String {
    let mut out = String::from("row_id,cate_mean,cate_lo,cate_hi\n");
    for (i, r) in summary.rows.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", i, r.mean.as_f64(), r.lo.as_f64(), r.hi.as_f64()));
    }
    out
}

pub fn write_cate_table<T: Scalar>(path: &Path, summary: &CateSummary<T>) -> Result<()> {
    std::fs::write(path, cate_table_text(summary)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows() {
        let f = file("y,z,x1\n1.0,0,0.5\n2.0,1,0.25\n3.5,1,-1\n");
        let ds: Dataset<f64> = load_csv(f.path(), "y", "z", None).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.n_covariates(), 1);
        assert_eq!(ds.z, vec![0, 1, 1]);
        assert_eq!(ds.x.column(0), &[0.5, 0.25, -1.0]);
    }

    #[test]
    fn bad_treatment_names_row() {
        let f = file("y,z,x1\n1.0,0,0.5\n2.0,2,0.25\n");
        let err = load_csv::<f64>(f.path(), "y", "z", None).unwrap_err();
        match err {
            XbcfError::Parse { row, ref column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "z");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("row 3"));
    }

    #[test]
    fn propensity_column() {
        let f = file("x1,y,pi,z\n0,1,0.5,0\n1,2,0.5,1\n");
        let ds: Dataset<f64> = load_csv(f.path(), "y", "z", Some("pi")).unwrap();
        assert_eq!(ds.pi_hat, Some(vec![0.5, 0.5]));
        assert_eq!(ds.n_covariates(), 1);
    }

    #[test]
    fn missing_and_non_numeric() {
        let f = file("y,z,x1\n1.0,0,abc\n");
        let err = load_csv::<f64>(f.path(), "y", "z", None).unwrap_err();
        assert!(matches!(err, XbcfError::Parse { row: 2, .. }), "{err}");
        let f = file("y,z,x1\n1.0,0,0.5\n");
        let err = load_csv::<f64>(f.path(), "y", "treat", None).unwrap_err();
        assert!(err.to_string().contains("treat"));
        let f = file("y,z,x1\n1.0,0,NaN\n");
        assert!(load_csv::<f64>(f.path(), "y", "z", None).unwrap_err().is_validation());
    }

    #[test]
    fn ignored_columns_are_dropped() {
        let f = file("y,z,x1,tau_true,x2\n1,0,0.1,3,5\n2,1,0.2,3,6\n");
        let mut spec = CsvSpec::new("y", "z");
        spec.ignore = vec!["tau_true".into()];
        let ds: Dataset<f64> = load_csv_with(f.path(), &spec).unwrap();
        assert_eq!(ds.n_covariates(), 2);
        assert_eq!(ds.x.column(1), &[5.0, 6.0]);
    }

    #[test]
    fn missing_file_is_io() {
        let err = load_csv::<f64>(Path::new("/nonexistent/data.csv"), "y", "z", None).unwrap_err();
        assert!(!err.is_validation());
    }
}
