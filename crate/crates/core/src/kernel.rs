//! Spatial kernel weights for local regressions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    FixedGaussian,
    AdaptiveBisquare,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::FixedGaussian => "fixed_gaussian",
            KernelKind::AdaptiveBisquare => "adaptive_bisquare",
        })
    }
}

/// Kernel and its bandwidth: a distance for the fixed Gaussian kernel, a
/// neighbor count (the location itself is rank 1) for the adaptive bisquare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelSpec {
    FixedGaussian { bandwidth: f64 },
    AdaptiveBisquare { neighbors: usize },
}

impl KernelSpec {
    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::FixedGaussian { .. } => KernelKind::FixedGaussian,
            KernelSpec::AdaptiveBisquare { .. } => KernelKind::AdaptiveBisquare,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            KernelSpec::FixedGaussian { bandwidth }
                if !(bandwidth > 0.0 && bandwidth.is_finite()) =>
            {
                Err(Error::InvalidBandwidth(format!(
                    "fixed bandwidth {bandwidth} must be positive"
                )))
            }
            KernelSpec::AdaptiveBisquare { neighbors } if neighbors < 2 || neighbors > n => {
                Err(Error::InvalidBandwidth(format!(
                    "adaptive neighbor count {neighbors} outside [2, {n}]"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Kernel weights of every observation for one regression location.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> WeightVector {
        WeightVector(self.0.iter().map(|w| w * c).collect())
    }

    /// Number of strictly positive weights.
    pub fn support(&self) -> usize {
        self.0.iter().filter(|&&w| w > 0.0).count()
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_bandwidth(b: f64) -> Result<()> {
    if b > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(format!(
            "bandwidth {b} must be positive"
        )))
    }
}

/// `exp(-d²/b²)`.
pub fn gaussian_weight(d: f64, b: f64) -> Result<f64> {
    check_bandwidth(b)?;
    Ok((-(d * d) / (b * b)).exp())
}

/// `(1 - (d/b)²)²` inside the support `d < b`, zero outside.
pub fn bisquare_weight(d: f64, b: f64) -> Result<f64> {
    check_bandwidth(b)?;
    if d < b {
        let u = d / b;
        let t = 1.0 - u * u;
        Ok(t * t)
    } else {
        Ok(0.0)
    }
}

/// Distance to the k-th nearest centroid counting `i` itself (rank 1).
pub fn adaptive_bandwidth(i: usize, dists: &DistanceMatrix, k: usize) -> Result<f64> {
    let mut row = dists.row(i).to_vec();
    let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
    let b = *kth;
    if b <= 0.0 {
        return Err(Error::DegenerateBandwidth(i));
    }
    Ok(b)
}

pub fn weights_for_location(
    i: usize,
    dists: &DistanceMatrix,
    spec: &KernelSpec,
) -> Result<WeightVector> {
    let n = dists.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    spec.validate(n)?;
    let row = dists.row(i);
    let w = match *spec {
        KernelSpec::FixedGaussian { bandwidth } => {
            let inv = 1.0 / (bandwidth * bandwidth);
            row.iter().map(|&d| (-(d * d) * inv).exp()).collect()
        }
        KernelSpec::AdaptiveBisquare { neighbors } => {
            let b = adaptive_bandwidth(i, dists, neighbors)?;
            row.iter()
                .map(|&d| bisquare_weight(d, b).expect("bandwidth checked positive"))
                .collect()
        }
    };
    Ok(WeightVector(w))
}
