//! Spatial analysis of areal data: geographically weighted regression with
//! cross-validated bandwidths, global Moran's I, neighborhood imputation and
//! K-means clustering of local coefficients.
//!
//! The modules mirror the analysis stages:
//!
//! * [`geometry`]: GeoJSON regions, centroids, queen contiguity, distances
//! * [`impute`]: neighbor-mean / neighbor-mode filling of missing covariates
//! * [`kernel`]: fixed Gaussian and adaptive bisquare weights
//! * [`regression`]: OLS, per-location GWR fits, LOO CV, bandwidth search
//! * [`moran`]: Moran's I and its permutation test
//! * [`cluster`]: K-means, silhouettes, K selection, label agreement
//! * [`pipeline`]: config-driven end-to-end runs, synthetic data, SVG maps

pub mod cluster;
pub mod error;
pub mod geometry;
pub mod impute;
pub mod kernel;
pub mod moran;
pub mod pipeline;
pub mod regression;

pub use error::{Error, Result};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "GEOCLUST_THREADS";

/// Configures the global thread pool from [`THREADS_ENV`] when it is set.
pub fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        Error::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    if threads == 0 {
        return Err(Error::Config(format!("{THREADS_ENV} must be at least 1")));
    }
    // A pool that is already initialised keeps its size.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}
