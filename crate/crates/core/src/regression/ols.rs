use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::linalg::least_squares;
use super::{total_sum_of_squares, DesignMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub r2: f64,
    /// Residual variance estimate `RSS / (n − p)`.
    pub sigma2: f64,
    pub df: usize,
}

/// Ordinary least squares with t-based two-sided p-values on `n − p` df.
pub fn ols_fit(design: &DesignMatrix) -> Result<OlsFit> {
    let (n, p) = (design.n(), design.p());
    if n <= p {
        return Err(Error::InvalidArgument(format!(
            "OLS needs more observations than columns (n = {n}, p = {p})"
        )));
    }
    let sol = least_squares(design.x(), design.y()).map_err(|e| {
        Error::SingularDesign(
            e.dependent
                .iter()
                .map(|&j| design.names()[j].clone())
                .collect(),
        )
    })?;
    let coefficients = sol.coefficients.clone();
    let fitted = design.x().mul_vec(&coefficients);
    let residuals: Vec<f64> = design.y().iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let df = n - p;
    let sigma2 = rss / df as f64;

    let tss = total_sum_of_squares(design.y());
    let sum_y2: f64 = design.y().iter().map(|v| v * v).sum();
    let mut r2 = if tss <= super::ZERO_VARIANCE_RTOL * sum_y2 {
        0.0
    } else {
        1.0 - rss / tss
    };
    if design.has_intercept() {
        r2 = r2.clamp(0.0, 1.0);
    }

    let t_dist = StudentsT::new(0.0, 1.0, df as f64).expect("df is positive");
    let std_errors: Vec<f64> = sol
        .unscaled_covariance_diagonal()
        .iter()
        .map(|d| (sigma2 * d).sqrt())
        .collect();
    let (t_values, p_values): (Vec<f64>, Vec<f64>) = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| {
            if se > 0.0 {
                let t = b / se;
                (t, 2.0 * t_dist.sf(t.abs()))
            } else if b == 0.0 {
                (0.0, 1.0)
            } else {
                (b.signum() * f64::INFINITY, 0.0)
            }
        })
        .unzip();

    Ok(OlsFit {
        names: design.names().to_vec(),
        coefficients,
        std_errors,
        t_values,
        p_values,
        residuals,
        r2,
        sigma2,
        df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::Matrix;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let fit =
            ols_fit(&DesignMatrix::with_intercept(vec![("x".into(), x)], y).unwrap()).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_constant() {
        let y = vec![4.5; 7];
        let fit = ols_fit(&DesignMatrix::with_intercept(vec![], y).unwrap()).unwrap();
        assert!((fit.coefficients[0] - 4.5).abs() < 1e-12);
        assert_eq!(fit.r2, 0.0);
    }

    #[test]
    fn singular_design_names_column() {
        let x: Vec<f64> = (0..6).map(f64::from).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let design =
            DesignMatrix::with_intercept(vec![("a".into(), x), ("b".into(), x2)], y).unwrap();
        match ols_fit(&design) {
            Err(Error::SingularDesign(cols)) => {
                assert_eq!(cols.len(), 1);
                assert!(cols[0] == "a" || cols[0] == "b");
            }
            other => panic!("expected singular design, got {other:?}"),
        }
    }

    #[test]
    fn requires_n_greater_than_p() {
        let design = DesignMatrix::new(
            vec!["intercept".into(), "x".into()],
            Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]),
            vec![1.0, 2.0],
        )
        .unwrap();
        assert!(ols_fit(&design).is_err());
    }

    #[test]
    fn p_values_known_case() {
        // x = 1..5, y = (1, 3, 2, 5, 4): slope 0.8, RSS 3.6, sigma² 1.2,
        // se = sqrt(1.2 / 10), t = 2.3094 on 3 df, two-sided p = 0.104088 (scipy).
        let x: Vec<f64> = (1..=5).map(f64::from).collect();
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let fit =
            ols_fit(&DesignMatrix::with_intercept(vec![("x".into(), x)], y).unwrap()).unwrap();
        assert!((fit.coefficients[0] - 0.6).abs() < 1e-12);
        assert!((fit.coefficients[1] - 0.8).abs() < 1e-12);
        assert!((fit.sigma2 - 1.2).abs() < 1e-12);
        assert!((fit.std_errors[1] - 0.12f64.sqrt()).abs() < 1e-12);
        assert!((fit.t_values[1] - 2.309_401_076_758_503).abs() < 1e-9);
        assert!(
            (fit.p_values[1] - 0.104_088_038_661_827_78).abs() < 1e-9,
            "p = {}",
            fit.p_values[1]
        );
    }
}
