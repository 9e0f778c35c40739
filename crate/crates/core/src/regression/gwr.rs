use rayon::prelude::*;

use super::linalg::{dot, weighted_least_squares};
use super::{total_sum_of_squares, DesignMatrix, ZERO_VARIANCE_RTOL};
use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;
use crate::kernel::{weights_for_location, KernelSpec, WeightVector};

/// Per-location GWR estimates and fit statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GwrFit {
    pub names: Vec<String>,
    /// Row `i` holds the local coefficients at location `i`.
    pub beta: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub local_r2: Vec<f64>,
    pub quasi_global_r2: f64,
    pub kernel: KernelSpec,
    pub cv_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    /// Contribution of a location whose leave-one-out fit is singular.
    pub singular_penalty: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            singular_penalty: f64::INFINITY,
        }
    }
}

fn check_dims(design: &DesignMatrix, dists: &DistanceMatrix) -> Result<()> {
    if design.n() != dists.n() {
        return Err(Error::Dimension {
            expected: design.n(),
            actual: dists.n(),
            context: "distance matrix vs design rows",
        });
    }
    Ok(())
}

/// Weighted least-squares coefficients at location `i`.
pub fn gwr_fit_at(i: usize, design: &DesignMatrix, w: &WeightVector) -> Result<Vec<f64>> {
    if w.len() != design.n() {
        return Err(Error::Dimension {
            expected: design.n(),
            actual: w.len(),
            context: "weight vector vs design rows",
        });
    }
    if w.as_slice().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if w.support() < design.p() {
        return Err(Error::LocalSingularity {
            index: i,
            region: None,
        });
    }
    weighted_least_squares(design.x(), design.y(), w.as_slice())
        .map(|s| s.coefficients)
        .map_err(|_| Error::LocalSingularity {
            index: i,
            region: None,
        })
}

/// Geographically weighted R² at one location.
pub fn local_r2(i: usize, design: &DesignMatrix, w: &WeightVector, beta_i: &[f64]) -> Result<f64> {
    let y = design.y();
    let wsum: f64 = w.as_slice().iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::UndefinedStatistic(format!(
            "local R² at {i}: zero total weight"
        )));
    }
    let ybar = w.as_slice().iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / wsum;
    let mut rss = 0.0;
    let mut tss = 0.0;
    let mut wy2 = 0.0;
    for (j, (&wj, &yj)) in w.as_slice().iter().zip(y).enumerate() {
        if wj == 0.0 {
            continue;
        }
        let r = yj - dot(design.x().row(j), beta_i);
        rss += wj * r * r;
        tss += wj * (yj - ybar).powi(2);
        wy2 += wj * yj * yj;
    }
    if tss <= ZERO_VARIANCE_RTOL * wy2 {
        return Err(Error::UndefinedStatistic(format!(
            "local R² at {i}: zero weighted variance of the response"
        )));
    }
    Ok((1.0 - rss / tss).clamp(0.0, 1.0))
}

/// `1 − RSS/TSS` over the GWR fitted values.
pub fn quasi_global_r2(residuals: &[f64], y: &[f64]) -> Result<f64> {
    if residuals.len() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            actual: residuals.len(),
            context: "residuals vs response",
        });
    }
    let tss = total_sum_of_squares(y);
    let sum_y2: f64 = y.iter().map(|v| v * v).sum();
    if tss <= ZERO_VARIANCE_RTOL * sum_y2 {
        return Err(Error::UndefinedStatistic(
            "quasi-global R²: response has zero variance".into(),
        ));
    }
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(1.0 - rss / tss)
}

/// Fits every location and fills in fit statistics, including the
/// leave-one-out CV score of `spec`.
pub fn gwr_fit(design: &DesignMatrix, dists: &DistanceMatrix, spec: &KernelSpec) -> Result<GwrFit> {
    check_dims(design, dists)?;
    spec.validate(design.n())?;
    let locals: Vec<(Vec<f64>, f64)> = (0..design.n())
        .into_par_iter()
        .map(|i| {
            let w = weights_for_location(i, dists, spec)?;
            let beta = gwr_fit_at(i, design, &w)?;
            let r2 = local_r2(i, design, &w, &beta)?;
            Ok((beta, r2))
        })
        .collect::<Result<_>>()?;

    let (beta, local_r2): (Vec<Vec<f64>>, Vec<f64>) = locals.into_iter().unzip();
    let fitted: Vec<f64> = beta
        .iter()
        .enumerate()
        .map(|(i, b)| dot(design.x().row(i), b))
        .collect();
    let residuals: Vec<f64> = design.y().iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let quasi_global_r2 = quasi_global_r2(&residuals, design.y())?;
    let cv_score = cv_score(design, dists, spec)?;
    Ok(GwrFit {
        names: design.names().to_vec(),
        beta,
        fitted,
        residuals,
        local_r2,
        quasi_global_r2,
        kernel: *spec,
        cv_score,
    })
}

/// Leave-one-out CV score with the default (+∞) singular penalty.
pub fn cv_score(design: &DesignMatrix, dists: &DistanceMatrix, spec: &KernelSpec) -> Result<f64> {
    cv_score_with(design, dists, spec, CvOptions::default())
}

/// `Σᵢ (yᵢ − xᵢ·β̂₋ᵢ(i))²`, where `β̂₋ᵢ(i)` is fitted with `wᵢᵢ = 0`.
pub fn cv_score_with(
    design: &DesignMatrix,
    dists: &DistanceMatrix,
    spec: &KernelSpec,
    options: CvOptions,
) -> Result<f64> {
    check_dims(design, dists)?;
    spec.validate(design.n())?;
    let terms: Vec<f64> = (0..design.n())
        .into_par_iter()
        .map(|i| {
            let mut w = weights_for_location(i, dists, spec)?;
            w.0[i] = 0.0;
            match gwr_fit_at(i, design, &w) {
                Ok(beta) => Ok((design.y()[i] - dot(design.x().row(i), &beta)).powi(2)),
                Err(Error::LocalSingularity { .. }) => Ok(options.singular_penalty),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    // Sequential sum keeps the score independent of thread count.
    Ok(terms.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::regression::{ols_fit, Matrix};

    fn line_points(n: usize) -> DistanceMatrix {
        DistanceMatrix::from_points(
            &(0..n)
                .map(|i| Point::new(i as f64, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn unit_weights_equal_ols() {
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..8)
            .map(|i| 1.0 + 0.5 * i as f64 + (i as f64).cos())
            .collect();
        let design = DesignMatrix::with_intercept(vec![("x".into(), x)], y).unwrap();
        let ols = ols_fit(&design).unwrap();
        let beta = gwr_fit_at(0, &design, &WeightVector(vec![1.0; 8])).unwrap();
        for (a, b) in beta.iter().zip(&ols.coefficients) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_interpolation_is_weight_invariant() {
        let design = DesignMatrix::new(
            vec!["intercept".into(), "x".into()],
            Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]),
            vec![2.0, 3.0],
        )
        .unwrap();
        for w in [vec![1.0, 1.0], vec![0.3, 7.0], vec![1e-6, 2.0]] {
            let beta = gwr_fit_at(0, &design, &WeightVector(w)).unwrap();
            assert!((beta[0] - 2.0).abs() < 1e-12 && (beta[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_drops_row() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 2.0], vec![1.0, 5.0]];
        let design = DesignMatrix::new(
            vec!["intercept".into(), "x".into()],
            Matrix::from_rows(&rows),
            vec![1.0, 5.0, -3.0],
        )
        .unwrap();
        let beta = gwr_fit_at(0, &design, &WeightVector(vec![1.0, 1.0, 0.0])).unwrap();
        // Line through (0, 1) and (2, 5).
        assert!((beta[0] - 1.0).abs() < 1e-12 && (beta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_weighted_rows_is_singular() {
        let design = DesignMatrix::with_intercept(
            vec![("x".into(), vec![0.0, 1.0, 2.0])],
            vec![1.0, 2.0, 4.0],
        )
        .unwrap();
        assert!(matches!(
            gwr_fit_at(2, &design, &WeightVector(vec![0.0, 0.0, 1.0])),
            Err(Error::LocalSingularity { index: 2, .. })
        ));
    }

    #[test]
    fn saturated_fit_has_zero_residuals() {
        let design = DesignMatrix::new(
            vec!["intercept".into(), "x".into()],
            Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]),
            vec![2.0, 3.0],
        )
        .unwrap();
        let fit = gwr_fit(
            &design,
            &line_points(2),
            &KernelSpec::FixedGaussian { bandwidth: 1.0 },
        );
        // Local fits interpolate; the LOO fit has one row for p = 2 -> +inf.
        let fit = fit.unwrap();
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!((fit.quasi_global_r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.cv_score, f64::INFINITY);
        assert!(fit.local_r2.iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn local_r2_null_model_is_zero() {
        let design = DesignMatrix::with_intercept(
            vec![("x".into(), vec![0.0, 1.0, 2.0, 3.0])],
            vec![1.0, 4.0, 2.0, 5.0],
        )
        .unwrap();
        let w = WeightVector(vec![1.0, 0.5, 2.0, 0.25]);
        let wsum: f64 = w.0.iter().sum();
        let ybar = w.0.iter().zip(design.y()).map(|(a, b)| a * b).sum::<f64>() / wsum;
        assert_eq!(local_r2(0, &design, &w, &[ybar, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn local_r2_constant_response_is_undefined() {
        let design =
            DesignMatrix::with_intercept(vec![("x".into(), vec![0.0, 1.0, 2.0])], vec![3.0; 3])
                .unwrap();
        assert!(matches!(
            local_r2(0, &design, &WeightVector(vec![1.0; 3]), &[3.0, 0.0]),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn quasi_global_examples() {
        let y = [1.0, 2.0, 3.0, 6.0];
        assert_eq!(quasi_global_r2(&[0.0; 4], &y).unwrap(), 1.0);
        let mean = 3.0;
        let resid: Vec<f64> = y.iter().map(|v| v - mean).collect();
        assert!(quasi_global_r2(&resid, &y).unwrap().abs() < 1e-15);
        assert!(quasi_global_r2(&[0.0; 3], &[2.0; 3]).is_err());
    }

    #[test]
    fn cv_adaptive_k2_is_infinite() {
        let design = DesignMatrix::with_intercept(
            vec![("x".into(), vec![0.3, 1.7, 0.9])],
            vec![1.0, 2.0, 0.5],
        )
        .unwrap();
        let d = DistanceMatrix::from_points(&[
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(3.0, 0.5),
        ]);
        let s = cv_score(&design, &d, &KernelSpec::AdaptiveBisquare { neighbors: 2 }).unwrap();
        assert_eq!(s, f64::INFINITY);
        let finite = cv_score_with(
            &design,
            &d,
            &KernelSpec::AdaptiveBisquare { neighbors: 2 },
            CvOptions {
                singular_penalty: 10.0,
            },
        )
        .unwrap();
        assert_eq!(finite, 30.0);
    }

    #[test]
    fn dimension_mismatch() {
        let design = DesignMatrix::with_intercept(
            vec![("x".into(), vec![0.0, 1.0, 2.0])],
            vec![1.0, 0.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            gwr_fit(
                &design,
                &line_points(4),
                &KernelSpec::FixedGaussian { bandwidth: 1.0 }
            ),
            Err(Error::Dimension { .. })
        ));
    }
}
