use crate::error::{Result, XbcfError};
use crate::scalar::Scalar;

/// Dense column-major covariate matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    n_rows: usize,
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_columns(columns: Vec<Vec<T>>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if let Some(j) = columns.iter().position(|c| c.len() != n_rows) {
            return Err(XbcfError::validation(format!(
                "column {j} has {} rows, expected {n_rows}",
                columns[j].len()
            )));
        }
        Ok(Matrix { n_rows, columns })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(XbcfError::validation(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(Matrix {
            n_rows: rows.len(),
            columns,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.columns[col][row]
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[T] {
        &self.columns[col]
    }

    pub fn row(&self, row: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    /// Copy of this matrix with `extra` appended as the last column.
    pub fn with_column(&self, extra: &[T]) -> Result<Self> {
        if extra.len() != self.n_rows && !(self.columns.is_empty() && self.n_rows == 0) {
            return Err(XbcfError::validation(format!(
                "appended column has {} rows, expected {}",
                extra.len(),
                self.n_rows
            )));
        }
        let mut columns = self.columns.clone();
        columns.push(extra.to_vec());
        Ok(Matrix {
            n_rows: extra.len(),
            columns,
        })
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Matrix {
            n_rows: idx.len(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            n_rows: self.n_rows,
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().map(|v| U::lit(v.as_f64())).collect())
                .collect(),
        }
    }
}

/// Observed outcomes, binary treatment labels, covariates and an optional
/// propensity column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub y: Vec<T>,
    pub z: Vec<u8>,
    pub x: Matrix<T>,
    pub pi_hat: Option<Vec<T>>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset and checks shape, label and finiteness invariants.
    /// Group non-emptiness is checked separately by [`Dataset::validate_for_fit`].
    pub fn new(y: Vec<T>, z: Vec<u8>, x: Matrix<T>, pi_hat: Option<Vec<T>>) -> Result<Self> {
        let ds = Dataset { y, z, x, pi_hat };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.n_cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.z.len() != n {
            return Err(XbcfError::validation(format!(
                "treatment vector has length {}, outcome has {n}",
                self.z.len()
            )));
        }
        if self.x.n_rows() != n && self.x.n_cols() > 0 {
            return Err(XbcfError::validation(format!(
                "covariate matrix has {} rows, outcome has {n}",
                self.x.n_rows()
            )));
        }
        if let Some(i) = self.z.iter().position(|&z| z > 1) {
            return Err(XbcfError::validation(format!(
                "treatment at row {i} is {}, expected 0 or 1",
                self.z[i]
            )));
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(XbcfError::validation(format!("outcome at row {i} is not finite")));
        }
        for j in 0..self.x.n_cols() {
            if let Some(i) = self.x.column(j).iter().position(|v| !v.is_finite()) {
                return Err(XbcfError::validation(format!(
                    "covariate {j} at row {i} is not finite"
                )));
            }
        }
        if let Some(pi) = &self.pi_hat {
            if pi.len() != n {
                return Err(XbcfError::validation(format!(
                    "propensity vector has length {}, outcome has {n}",
                    pi.len()
                )));
            }
            if let Some(i) = pi
                .iter()
                .position(|&p| !(p.is_finite() && p > T::zero() && p < T::one()))
            {
                return Err(XbcfError::validation(format!(
                    "propensity at row {i} is {}, expected a value in (0, 1)",
                    pi[i]
                )));
            }
        }
        Ok(())
    }

    /// Additional requirements for fitting: both groups present and a
    /// propensity column available.
    pub fn validate_for_fit(&self) -> Result<()> {
        self.validate()?;
        let n1 = self.z.iter().filter(|&&z| z == 1).count();
        if n1 == 0 || n1 == self.n() {
            return Err(XbcfError::validation(
                "both treatment groups must contain at least one unit",
            ));
        }
        if self.pi_hat.is_none() {
            return Err(XbcfError::validation(
                "a propensity column is required for fitting",
            ));
        }
        Ok(())
    }

    pub fn group_counts(&self) -> (usize, usize) {
        let n1 = self.z.iter().filter(|&&z| z == 1).count();
        (self.n() - n1, n1)
    }
}
