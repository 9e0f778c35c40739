//! Synthetic grid datasets with known coefficient surfaces.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rectangle, RegionSet};

use super::config::{CovariateConfig, InputConfig, ModelConfig, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Surface {
    Constant,
    TwoBlock,
    SmoothGradient,
}

impl std::str::FromStr for Surface {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Surface::Constant),
            "two-block" | "two_block" => Ok(Surface::TwoBlock),
            "smooth-gradient" | "smooth_gradient" => Ok(Surface::SmoothGradient),
            other => Err(Error::InvalidArgument(format!("unknown surface `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub surface: Surface,
    pub noise_sd: f64,
    pub seed: u64,
    /// Horizontal gap inserted between the two halves of a two-block grid.
    pub block_gap: f64,
}

impl SyntheticSpec {
    pub fn new(width: usize, height: usize, surface: Surface) -> Self {
        SyntheticSpec {
            width,
            height,
            surface,
            noise_sd: 0.0,
            seed: 0,
            block_gap: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(
                "grid dimensions must be positive".into(),
            ));
        }
        if !(self.noise_sd >= 0.0) || !(self.block_gap >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise and gap must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

pub const COVARIATES: [&str; 2] = ["x1", "x2"];
pub const BLOCK_LEFT: [f64; 3] = [1.0, 2.0, -1.0];
pub const BLOCK_RIGHT: [f64; 3] = [3.0, -1.0, 0.5];

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub regions: RegionSet,
    /// `[x1, x2]` per region.
    pub covariates: Vec<[f64; 2]>,
    pub y: Vec<f64>,
    /// `[intercept, x1, x2]` per region.
    pub beta: Vec<[f64; 3]>,
    /// Block index (0 = left, 1 = right) for the two-block surface.
    pub block: Vec<usize>,
}

fn true_beta(
    surface: Surface,
    col: usize,
    row: usize,
    width: usize,
    height: usize,
) -> ([f64; 3], usize) {
    let block = usize::from(col >= width / 2 && width > 1);
    match surface {
        Surface::Constant => (BLOCK_LEFT, 0),
        Surface::TwoBlock => (if block == 0 { BLOCK_LEFT } else { BLOCK_RIGHT }, block),
        Surface::SmoothGradient => {
            let u = col as f64 / (width.max(2) - 1) as f64;
            let v = row as f64 / (height.max(2) - 1) as f64;
            ([1.0 + u + v, 2.0 - 2.0 * u, -1.0 + 1.5 * v], 0)
        }
    }
}

/// Builds the grid, covariates and response `y = xβ(u, v) + σ·z`.
///
/// Covariates and standard normal noise come from separate streams of the
/// seeded generator, so changing `noise_sd` only rescales the noise.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut cov_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    cov_rng.set_stream(0);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);

    let mut regions = Vec::with_capacity(w * h);
    let mut covariates = Vec::with_capacity(w * h);
    let mut y = Vec::with_capacity(w * h);
    let mut beta = Vec::with_capacity(w * h);
    let mut block = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let (b, blk) = true_beta(spec.surface, col, row, w, h);
            let shift = if spec.surface == Surface::TwoBlock && blk == 1 {
                spec.block_gap
            } else {
                0.0
            };
            let x0 = col as f64 + shift;
            let y0 = row as f64;
            regions.push(rectangle(
                format!("r{:04}", row * w + col),
                x0,
                y0,
                x0 + 1.0,
                y0 + 1.0,
            )?);
            let x: [f64; 2] = [
                StandardNormal.sample(&mut cov_rng),
                StandardNormal.sample(&mut cov_rng),
            ];
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            y.push(b[0] + b[1] * x[0] + b[2] * x[1] + spec.noise_sd * z);
            covariates.push(x);
            beta.push(b);
            block.push(blk);
        }
    }
    Ok(SyntheticData {
        regions: RegionSet::new(regions)?,
        covariates,
        y,
        beta,
        block,
    })
}

impl SyntheticData {
    pub fn regions_geojson(&self) -> String {
        regions_to_geojson(&self.regions, |_| Vec::new())
    }

    pub fn covariates_csv(&self) -> String {
        let mut out = String::from("region_id,y,x1,x2\n");
        for ((r, x), y) in self.regions.iter().zip(&self.covariates).zip(&self.y) {
            let _ = writeln!(out, "{},{},{},{}", r.id, y, x[0], x[1]);
        }
        out
    }

    pub fn truth_csv(&self) -> String {
        let mut out = String::from("region_id,beta_intercept,beta_x1,beta_x2\n");
        for (r, b) in self.regions.iter().zip(&self.beta) {
            let _ = writeln!(out, "{},{},{},{}", r.id, b[0], b[1], b[2]);
        }
        out
    }

    /// Pipeline config for the files written by [`write_synthetic`].
    pub fn default_config() -> PipelineConfig {
        PipelineConfig {
            input: InputConfig {
                regions: "regions.geojson".into(),
                covariates: Some("covariates.csv".into()),
                id_property: "id".into(),
                id_column: "region_id".into(),
                snap_tol: crate::geometry::DEFAULT_SNAP_TOL,
            },
            model: ModelConfig {
                response: "y".into(),
                covariates: COVARIATES
                    .iter()
                    .map(|c| CovariateConfig::continuous(*c))
                    .collect(),
            },
            gwr: Default::default(),
            moran: Default::default(),
            clustering: Default::default(),
            output: Default::default(),
        }
    }
}

/// Serialises regions as a GeoJSON FeatureCollection; `extra` supplies
/// additional properties per region index.
pub fn regions_to_geojson<F>(regions: &RegionSet, extra: F) -> String
where
    F: Fn(usize) -> Vec<(String, serde_json::Value)>,
{
    use serde_json::{json, Map, Value};
    let features: Vec<Value> = regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut props = Map::new();
            props.insert("id".into(), Value::String(r.id.clone()));
            for (k, v) in extra(i) {
                props.insert(k, v);
            }
            // Exterior rings start new polygons; holes attach to the last one.
            let mut polygons: Vec<Vec<Vec<[f64; 2]>>> = Vec::new();
            for ring in &r.rings {
                let coords: Vec<[f64; 2]> = ring.points.iter().map(|p| [p.x, p.y]).collect();
                match polygons.last_mut() {
                    Some(poly) if ring.hole => poly.push(coords),
                    _ => polygons.push(vec![coords]),
                }
            }
            let geometry = if polygons.len() == 1 {
                json!({"type": "Polygon", "coordinates": polygons[0]})
            } else {
                json!({"type": "MultiPolygon", "coordinates": polygons})
            };
            json!({"type": "Feature", "properties": props, "geometry": geometry})
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    let mut s = serde_json::to_string(&doc).expect("geojson serialises");
    s.push('\n');
    s
}

/// Writes `regions.geojson`, `covariates.csv`, `truth.csv` and a ready-to-run
/// `config.toml` into `dir`.
pub fn write_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticData> {
    let data = generate_synthetic(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let files = [
        ("regions.geojson", data.regions_geojson()),
        ("covariates.csv", data.covariates_csv()),
        ("truth.csv", data.truth_csv()),
        ("config.toml", SyntheticData::default_config().to_toml()?),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(data)
}
