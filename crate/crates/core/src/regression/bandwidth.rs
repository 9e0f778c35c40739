use serde::Serialize;

use super::gwr::cv_score;
use super::{total_sum_of_squares, DesignMatrix};
use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;
use crate::kernel::{KernelKind, KernelSpec};

/// Golden-section iterations for the fixed kernel search.
pub const GOLDEN_ITERATIONS: usize = 60;

/// CV scores within this fraction of the response's total sum of squares
/// are treated as ties.
const CV_TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSelection {
    pub spec: KernelSpec,
    pub cv_score: f64,
    /// Every evaluated `(bandwidth or neighbor count, cv score)` in probe order.
    pub probes: Vec<(f64, f64)>,
}

/// Picks the bandwidth minimising the leave-one-out CV score.
///
/// Fixed Gaussian: golden-section search on log-bandwidth over
/// `[0.1·min nonzero distance, 10·max distance]`; near-ties move toward the
/// larger bandwidth. Adaptive bisquare: exhaustive scan of `k ∈ [p+2, n]`,
/// smallest `k` on ties.
pub fn optimize_bandwidth(
    design: &DesignMatrix,
    dists: &DistanceMatrix,
    kind: KernelKind,
) -> Result<BandwidthSelection> {
    match kind {
        KernelKind::FixedGaussian => golden_fixed(design, dists),
        KernelKind::AdaptiveBisquare => scan_adaptive(design, dists),
    }
}

fn golden_fixed(design: &DesignMatrix, dists: &DistanceMatrix) -> Result<BandwidthSelection> {
    let min_d = dists
        .min_nonzero()
        .ok_or_else(|| Error::NoFeasibleBandwidth("all centroids coincide".into()))?;
    let tol = CV_TIE_RTOL * total_sum_of_squares(design.y());
    let mut lo = (0.1 * min_d).ln();
    let mut hi = (10.0 * dists.max()).ln();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;

    let mut probes = Vec::with_capacity(GOLDEN_ITERATIONS + 2);
    let eval = |log_b: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let b = log_b.exp();
        let s = cv_score(design, dists, &KernelSpec::FixedGaussian { bandwidth: b })?;
        probes.push((b, s));
        Ok(s)
    };

    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = eval(c, &mut probes)?;
    let mut fd = eval(d, &mut probes)?;
    for _ in 2..GOLDEN_ITERATIONS {
        if fc < fd - tol {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval(c, &mut probes)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval(d, &mut probes)?;
        }
    }

    let mut best = probes[0];
    for &(b, s) in &probes[1..] {
        let tie = (s - best.1).abs() <= tol;
        if s < best.1 - tol || (tie && b > best.0) {
            best = (b, s);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::NoFeasibleBandwidth(
            "every probed Gaussian bandwidth gave a singular leave-one-out fit".into(),
        ));
    }
    Ok(BandwidthSelection {
        spec: KernelSpec::FixedGaussian { bandwidth: best.0 },
        cv_score: best.1,
        probes,
    })
}

fn scan_adaptive(design: &DesignMatrix, dists: &DistanceMatrix) -> Result<BandwidthSelection> {
    let (n, p) = (design.n(), design.p());
    if n < p + 2 {
        return Err(Error::NoFeasibleBandwidth(format!(
            "neighbor scan [{}, {n}] is empty",
            p + 2
        )));
    }
    let mut probes = Vec::with_capacity(n - p - 1);
    let mut best: Option<(usize, f64)> = None;
    for k in p + 2..=n {
        let s = cv_score(
            design,
            dists,
            &KernelSpec::AdaptiveBisquare { neighbors: k },
        )?;
        probes.push((k as f64, s));
        if s.is_finite() && best.is_none_or(|(_, bs)| s < bs) {
            best = Some((k, s));
        }
    }
    let (k, s) = best.ok_or_else(|| {
        Error::NoFeasibleBandwidth("every neighbor count gave a singular leave-one-out fit".into())
    })?;
    Ok(BandwidthSelection {
        spec: KernelSpec::AdaptiveBisquare { neighbors: k },
        cv_score: s,
        probes,
    })
}
