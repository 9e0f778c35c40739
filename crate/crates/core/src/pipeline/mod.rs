//! Pipeline orchestration, configuration, synthetic data and map output.

pub mod config;
pub mod render;
mod run;
pub mod synth;

pub use config::{
    ClusteringConfig, CovariateConfig, CovariateKind, GwrConfig, InputConfig, ModelConfig,
    MoranConfig, OutputConfig, PipelineConfig,
};
pub use render::{class_of, quantile_breaks, render_categorical, render_choropleth, Palette};
pub use run::{
    analyze, prepare_data, render_outputs, run_moran, run_pipeline, Analysis, ClusterSummary,
    KSilhouette, ModelSummary, OlsRow, PipelineOutput, PreparedData, TermSummary,
};
pub use synth::{
    generate_synthetic, regions_to_geojson, write_synthetic, Surface, SyntheticData, SyntheticSpec,
};
