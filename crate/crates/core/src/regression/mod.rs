//! Global OLS baseline and geographically weighted regression.

mod bandwidth;
mod gwr;
pub mod linalg;
mod ols;

pub use bandwidth::{optimize_bandwidth, BandwidthSelection};
pub use gwr::{
    cv_score, cv_score_with, gwr_fit, gwr_fit_at, local_r2, quasi_global_r2, CvOptions, GwrFit,
};
pub use linalg::Matrix;
pub use ols::{ols_fit, OlsFit};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "intercept";

/// Regressors `X` (`n × p`, intercept first when present) with response `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    x: Matrix,
    y: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, x: Matrix, y: Vec<f64>) -> Result<Self> {
        if names.len() != x.cols() {
            return Err(Error::Dimension {
                expected: x.cols(),
                actual: names.len(),
                context: "column names vs design columns",
            });
        }
        if y.len() != x.rows() {
            return Err(Error::Dimension {
                expected: x.rows(),
                actual: y.len(),
                context: "response length vs design rows",
            });
        }
        if x.cols() == 0 {
            return Err(Error::InvalidArgument(
                "design needs at least one column".into(),
            ));
        }
        if x.data().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "design contains non-finite values".into(),
            ));
        }
        Ok(DesignMatrix { names, x, y })
    }

    /// Prepends an all-ones `intercept` column to the named covariates.
    pub fn with_intercept(covariates: Vec<(String, Vec<f64>)>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        let p = covariates.len() + 1;
        let mut names = Vec::with_capacity(p);
        names.push(INTERCEPT.to_string());
        for (name, col) in &covariates {
            if col.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: col.len(),
                    context: "covariate column length",
                });
            }
            names.push(name.clone());
        }
        let mut data = Vec::with_capacity(n * p);
        for i in 0..n {
            data.push(1.0);
            data.extend(covariates.iter().map(|(_, c)| c[i]));
        }
        Self::new(names, Matrix::from_row_major(n, p, data), y)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn has_intercept(&self) -> bool {
        (0..self.n()).all(|i| self.x.get(i, 0) == 1.0)
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: self.names.clone(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Total sum of squares about the mean.
pub(crate) fn total_sum_of_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

/// Variance below this fraction of `Σy²` is treated as zero.
pub(crate) const ZERO_VARIANCE_RTOL: f64 = 1e-24;
