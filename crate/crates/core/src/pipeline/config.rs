use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::KMeansInit;
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_SNAP_TOL;
use crate::kernel::{KernelKind, KernelSpec};
use crate::moran::DEFAULT_PERMUTATIONS;

use super::render::Palette;

/// One TOML document that fully determines a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub gwr: GwrConfig,
    #[serde(default)]
    pub moran: MoranConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// GeoJSON FeatureCollection (planar, projected coordinates).
    pub regions: PathBuf,
    /// Optional covariate table joined on region id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<PathBuf>,
    #[serde(default = "default_id_property")]
    pub id_property: String,
    #[serde(default = "default_id_column")]
    pub id_column: String,
    #[serde(default = "default_snap_tol")]
    pub snap_tol: f64,
}

fn default_id_property() -> String {
    "id".into()
}

fn default_id_column() -> String {
    "region_id".into()
}

fn default_snap_tol() -> f64 {
    DEFAULT_SNAP_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub response: String,
    #[serde(default)]
    pub covariates: Vec<CovariateConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateConfig {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: CovariateKind,
    /// Reference level for one-hot encoding (categorical only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
}

impl CovariateConfig {
    pub fn continuous(name: impl Into<String>) -> Self {
        CovariateConfig {
            name: name.into(),
            kind: CovariateKind::Continuous,
            baseline: None,
        }
    }

    pub fn categorical(name: impl Into<String>, baseline: Option<&str>) -> Self {
        CovariateConfig {
            name: name.into(),
            kind: CovariateKind::Categorical,
            baseline: baseline.map(str::to_string),
        }
    }
}

/// Kernel choice. Leaving both `bandwidth` and `neighbors` unset selects the
/// bandwidth by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwrConfig {
    pub kernel: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<usize>,
}

impl Default for GwrConfig {
    fn default() -> Self {
        GwrConfig {
            kernel: KernelKind::AdaptiveBisquare,
            bandwidth: None,
            neighbors: None,
        }
    }
}

impl GwrConfig {
    /// The fixed kernel, or `None` for automatic selection.
    pub fn fixed_spec(&self) -> Result<Option<KernelSpec>> {
        match (self.kernel, self.bandwidth, self.neighbors) {
            (_, Some(_), Some(_)) => Err(Error::Config(
                "gwr: set at most one of `bandwidth` and `neighbors`".into(),
            )),
            (KernelKind::FixedGaussian, Some(b), None) => {
                Ok(Some(KernelSpec::FixedGaussian { bandwidth: b }))
            }
            (KernelKind::AdaptiveBisquare, None, Some(k)) => {
                Ok(Some(KernelSpec::AdaptiveBisquare { neighbors: k }))
            }
            (KernelKind::FixedGaussian, None, Some(_)) => Err(Error::Config(
                "gwr: `neighbors` applies to adaptive_bisquare; use `bandwidth`".into(),
            )),
            (KernelKind::AdaptiveBisquare, Some(_), None) => Err(Error::Config(
                "gwr: `bandwidth` applies to fixed_gaussian; use `neighbors`".into(),
            )),
            (_, None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoranConfig {
    pub permutations: usize,
    pub seed: u64,
    pub row_standardize: bool,
}

impl Default for MoranConfig {
    fn default() -> Self {
        MoranConfig {
            permutations: DEFAULT_PERMUTATIONS,
            seed: 1,
            row_standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Fixed K; when unset K is chosen by silhouette over `[k_min, k_max]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub standardize: bool,
    pub include_intercept: bool,
    pub init: KMeansInit,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k: None,
            k_min: 2,
            k_max: 6,
            seed: 1,
            restarts: 20,
            max_iter: 300,
            standardize: false,
            include_intercept: false,
            init: KMeansInit::PlusPlus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Quantile classes in the continuous maps.
    pub classes: usize,
    pub palette: Palette,
    pub coefficient_palette: Palette,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("output"),
            classes: 5,
            palette: Palette::Viridis,
            coefficient_palette: Palette::RdBu,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.regions);
        if let Some(c) = self.input.covariates.as_mut() {
            fix(c);
        }
        fix(&mut self.output.dir);
    }

    /// Checks that do not need the input data.
    pub fn validate(&self) -> Result<()> {
        self.gwr.fixed_spec()?;
        if self.model.response.is_empty() {
            return Err(Error::Config("model.response is empty".into()));
        }
        for c in &self.model.covariates {
            if c.name == self.model.response {
                return Err(Error::Config(format!(
                    "`{}` is both response and covariate",
                    c.name
                )));
            }
            if c.kind == CovariateKind::Continuous && c.baseline.is_some() {
                return Err(Error::Config(format!(
                    "covariate `{}`: baseline only applies to categorical covariates",
                    c.name
                )));
            }
        }
        if self.moran.permutations < crate::moran::MIN_PERMUTATIONS {
            return Err(Error::Config(format!(
                "moran.permutations must be at least {}",
                crate::moran::MIN_PERMUTATIONS
            )));
        }
        if self.clustering.k.is_none() && self.clustering.k_min > self.clustering.k_max {
            return Err(Error::Config("clustering.k_min exceeds k_max".into()));
        }
        if self.clustering.restarts == 0 || self.clustering.max_iter == 0 {
            return Err(Error::Config(
                "clustering.restarts and max_iter must be positive".into(),
            ));
        }
        if self.output.classes == 0 {
            return Err(Error::Config("output.classes must be positive".into()));
        }
        if !(self.input.snap_tol >= 0.0) {
            return Err(Error::Config("input.snap_tol must be nonnegative".into()));
        }
        Ok(())
    }
}
