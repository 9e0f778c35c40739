//! End-to-end orchestration: load, join, impute, fit, test, cluster, export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::cluster::{kmeans, select_k, FeatureTable, KMeansOptions};
use crate::error::{Error, Result};
use crate::geometry::{
    distance_matrix, load_regions, queen_adjacency, AdjacencyGraph, AttrValue, RegionSet,
};
use crate::impute::{impute_categorical, impute_continuous, ImputationReport};
use crate::kernel::KernelSpec;
use crate::moran::{moran_permutation_test, MoranResult};
use crate::regression::{gwr_fit, ols_fit, optimize_bandwidth, DesignMatrix, GwrFit, OlsFit};

use super::config::{CovariateKind, PipelineConfig};
use super::render::{render_categorical, render_choropleth};
use super::synth::regions_to_geojson;

/// Data after join and imputation, restricted to the regions kept for fitting.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub all_regions: RegionSet,
    /// Indices into `all_regions` of the regions used for fitting.
    pub kept: Vec<usize>,
    pub regions: RegionSet,
    /// Queen graph among the kept regions.
    pub graph: AdjacencyGraph,
    pub report: ImputationReport,
    /// `(region index, variable)` for regions dropped for a missing response.
    pub missing_response: Vec<(usize, String)>,
    pub design: DesignMatrix,
}

impl PreparedData {
    pub fn excluded(&self) -> Vec<usize> {
        let kept: BTreeSet<usize> = self.kept.iter().copied().collect();
        (0..self.all_regions.len())
            .filter(|i| !kept.contains(i))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OlsRow {
    pub term: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

/// Per-term summary: GWR coefficient mean and range next to the global OLS
/// estimate and p-value.
#[derive(Debug, Clone, Serialize)]
pub struct TermSummary {
    pub term: String,
    pub gwr_mean: f64,
    pub gwr_min: f64,
    pub gwr_max: f64,
    pub ols_coefficient: f64,
    pub ols_p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub response: String,
    pub n_regions: usize,
    pub n_excluded: usize,
    pub excluded_regions: Vec<String>,
    pub terms: Vec<String>,
    pub kernel: KernelSpec,
    pub bandwidth_selection: &'static str,
    pub cv_score: f64,
    pub quasi_global_r2: f64,
    pub local_r2_min: f64,
    pub local_r2_max: f64,
    pub local_r2_mean: f64,
    pub ols_r2: f64,
    pub ols_sigma2: f64,
    pub ols: Vec<OlsRow>,
    pub table1: Vec<TermSummary>,
    pub moran_response: MoranResult,
    /// Computed on raw (unstandardized) GWR residuals.
    pub moran_residuals: MoranResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct KSilhouette {
    pub k: usize,
    pub silhouette: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub wss: f64,
    pub silhouette_mean: Option<f64>,
    pub per_k_silhouettes: Vec<KSilhouette>,
    pub sizes: Vec<usize>,
    pub features: Vec<String>,
    pub standardized: bool,
    pub include_intercept: bool,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub ols: OlsFit,
    pub gwr: GwrFit,
    pub moran_response: MoranResult,
    pub moran_residuals: MoranResult,
    pub labels: Vec<usize>,
    pub clusters: ClusterSummary,
    pub summary: ModelSummary,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub files: Vec<PathBuf>,
    pub analysis: Analysis,
    pub prepared: PreparedData,
}

fn parse_cell(raw: &str) -> AttrValue {
    let s = raw.trim();
    if s.is_empty()
        || s.eq_ignore_ascii_case("na")
        || s.eq_ignore_ascii_case("nan")
        || s.eq_ignore_ascii_case("null")
    {
        return AttrValue::Missing;
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => AttrValue::Number(v),
        _ => AttrValue::Category(s.to_string()),
    }
}

/// Joins the covariate CSV onto the regions by id, one-to-one.
fn join_covariates(regions: &mut RegionSet, path: &Path, id_column: &str) -> Result<()> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => {
            Error::Config(format!("cannot read covariates {}: {e}", path.display()))
        }
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers()?.clone();
    let id_idx = headers
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| Error::Config(format!("covariate table has no `{id_column}` column")))?;
    let index: BTreeMap<String, usize> = regions
        .ids()
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    let mut seen = vec![false; regions.len()];
    let mut duplicates = BTreeSet::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(id_idx).unwrap_or("").trim().to_string();
        let &i = index
            .get(&id)
            .ok_or_else(|| Error::Config(format!("covariate row `{id}` matches no region")))?;
        if seen[i] {
            duplicates.insert(id);
            continue;
        }
        seen[i] = true;
        let region = &mut regions.regions_mut()[i];
        for (k, (header, cell)) in headers.iter().zip(record.iter()).enumerate() {
            if k != id_idx {
                region
                    .attributes
                    .insert(header.to_string(), parse_cell(cell));
            }
        }
    }
    if !duplicates.is_empty() {
        return Err(Error::DuplicateIds(duplicates.into_iter().collect()));
    }
    let unmatched: Vec<String> = regions
        .iter()
        .zip(&seen)
        .filter(|(_, s)| !**s)
        .map(|(r, _)| r.id.clone())
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Config(format!(
            "regions without a covariate row: {}",
            unmatched.join(", ")
        )));
    }
    Ok(())
}

fn column_exists(regions: &RegionSet, name: &str) -> bool {
    regions.iter().any(|r| r.attributes.contains_key(name))
}

fn numeric_column(regions: &RegionSet, name: &str) -> Result<Vec<Option<f64>>> {
    regions
        .iter()
        .map(|r| match r.attr(name) {
            AttrValue::Number(v) => Ok(Some(*v)),
            AttrValue::Missing => Ok(None),
            AttrValue::Category(s) => Err(Error::Config(format!(
                "column `{name}` is continuous but region `{}` has value `{s}`",
                r.id
            ))),
        })
        .collect()
}

fn categorical_column(regions: &RegionSet, name: &str) -> Vec<Option<String>> {
    regions
        .iter()
        .map(|r| match r.attr(name) {
            AttrValue::Number(v) => Some(v.to_string()),
            AttrValue::Category(s) => Some(s.clone()),
            AttrValue::Missing => None,
        })
        .collect()
}

enum Column {
    Continuous(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

/// Load, join and impute; builds the design over the kept regions.
pub fn prepare_data(config: &PipelineConfig) -> Result<PreparedData> {
    config.validate()?;
    let bytes = std::fs::read(&config.input.regions)
        .map_err(|e| {
            Error::Config(format!(
                "cannot read regions {}: {e}",
                config.input.regions.display()
            ))
        })
        .map_err(|e| e.in_stage("load"))?;
    let mut all_regions =
        load_regions(&bytes, &config.input.id_property).map_err(|e| e.in_stage("load"))?;

    if let Some(path) = &config.input.covariates {
        join_covariates(&mut all_regions, path, &config.input.id_column)
            .map_err(|e| e.in_stage("join"))?;
    }
    let model = &config.model;
    for name in std::iter::once(&model.response).chain(model.covariates.iter().map(|c| &c.name)) {
        if !column_exists(&all_regions, name) {
            return Err(
                Error::Config(format!("column `{name}` not found in the input data"))
                    .in_stage("join"),
            );
        }
    }

    let impute_stage = |e: Error| e.in_stage("impute");
    let full_graph = queen_adjacency(&all_regions, config.input.snap_tol);
    let response = numeric_column(&all_regions, &model.response).map_err(impute_stage)?;
    let mut report = ImputationReport::default();
    let mut columns = Vec::with_capacity(model.covariates.len());
    for cov in &model.covariates {
        let col = match cov.kind {
            CovariateKind::Continuous => {
                let values = numeric_column(&all_regions, &cov.name).map_err(impute_stage)?;
                let (filled, r) =
                    impute_continuous(&cov.name, &values, &full_graph).map_err(impute_stage)?;
                report.merge(r);
                Column::Continuous(filled)
            }
            CovariateKind::Categorical => {
                let values = categorical_column(&all_regions, &cov.name);
                let (filled, r) =
                    impute_categorical(&cov.name, &values, &full_graph).map_err(impute_stage)?;
                report.merge(r);
                Column::Categorical(filled)
            }
        };
        columns.push(col);
    }

    let missing_response: Vec<(usize, String)> = response
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(i, _)| (i, model.response.clone()))
        .collect();
    let mut dropped: BTreeSet<usize> = report.unimputable_regions().into_iter().collect();
    dropped.extend(missing_response.iter().map(|(i, _)| *i));
    let kept: Vec<usize> = (0..all_regions.len())
        .filter(|i| !dropped.contains(i))
        .collect();
    if kept.is_empty() {
        return Err(Error::Config("no regions left after imputation".into()).in_stage("impute"));
    }

    let y: Vec<f64> = kept
        .iter()
        .map(|&i| response[i].expect("kept rows have a response"))
        .collect();
    let mut design_cols: Vec<(String, Vec<f64>)> = Vec::new();
    for (cov, col) in model.covariates.iter().zip(&columns) {
        match col {
            Column::Continuous(v) => {
                design_cols.push((
                    cov.name.clone(),
                    kept.iter().map(|&i| v[i].expect("imputed")).collect(),
                ));
            }
            Column::Categorical(v) => {
                let levels: BTreeSet<&str> = kept
                    .iter()
                    .map(|&i| v[i].as_deref().expect("imputed"))
                    .collect();
                let baseline = match &cov.baseline {
                    Some(b) if levels.contains(b.as_str()) => b.clone(),
                    Some(b) => {
                        return Err(Error::Config(format!(
                            "baseline `{b}` of `{}` is not among its levels ({})",
                            cov.name,
                            levels.iter().copied().collect::<Vec<_>>().join(", ")
                        ))
                        .in_stage("design"))
                    }
                    None => levels.iter().next().expect("nonempty").to_string(),
                };
                for level in levels.iter().filter(|l| **l != baseline) {
                    let dummy = kept
                        .iter()
                        .map(|&i| f64::from(u8::from(v[i].as_deref() == Some(*level))))
                        .collect();
                    design_cols.push((format!("{}_{}", cov.name, level), dummy));
                }
            }
        }
    }
    let design = DesignMatrix::with_intercept(design_cols, y).map_err(|e| e.in_stage("design"))?;
    let graph = full_graph.induced(&kept);
    let regions = all_regions.subset(&kept);
    Ok(PreparedData {
        all_regions,
        kept,
        regions,
        graph,
        report,
        missing_response,
        design,
    })
}

fn name_region(e: Error, ids: &[String]) -> Error {
    match e {
        Error::LocalSingularity {
            index,
            region: None,
        } => Error::LocalSingularity {
            index,
            region: ids.get(index).cloned(),
        },
        other => other,
    }
}

/// Moran's I permutation test on the response only.
pub fn run_moran(config: &PipelineConfig) -> Result<MoranResult> {
    let data = prepare_data(config)?;
    moran_permutation_test(
        data.design.y(),
        &data.graph,
        config.moran.permutations,
        config.moran.seed,
        config.moran.row_standardize,
    )
    .map_err(|e| e.in_stage("moran_response"))
}

/// Relabels clusters by first appearance in region order.
fn canonical_labels(labels: &[usize], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    let mut new_centroids = vec![Vec::new(); centroids.len()];
    for (&old, &new) in &map {
        new_centroids[new] = centroids[old].clone();
    }
    (labels.iter().map(|l| map[l]).collect(), new_centroids)
}

pub fn analyze(data: &PreparedData, config: &PipelineConfig) -> Result<Analysis> {
    let design = &data.design;
    let ids = data.regions.ids();
    let ols = ols_fit(design).map_err(|e| e.in_stage("ols"))?;
    let moran_cfg = &config.moran;
    let moran_response = moran_permutation_test(
        design.y(),
        &data.graph,
        moran_cfg.permutations,
        moran_cfg.seed,
        moran_cfg.row_standardize,
    )
    .map_err(|e| e.in_stage("moran_response"))?;

    let dists = distance_matrix(&data.regions);
    let (spec, selection) = match config
        .gwr
        .fixed_spec()
        .map_err(|e| e.in_stage("bandwidth"))?
    {
        Some(spec) => (spec, "fixed"),
        None => {
            let sel = optimize_bandwidth(design, &dists, config.gwr.kernel)
                .map_err(|e| name_region(e, &ids).in_stage("bandwidth"))?;
            (sel.spec, "cross_validation")
        }
    };
    let gwr = gwr_fit(design, &dists, &spec).map_err(|e| name_region(e, &ids).in_stage("gwr"))?;
    let moran_residuals = moran_permutation_test(
        &gwr.residuals,
        &data.graph,
        moran_cfg.permutations,
        moran_cfg.seed,
        moran_cfg.row_standardize,
    )
    .map_err(|e| e.in_stage("moran_residuals"))?;

    let cc = &config.clustering;
    let cluster_stage = |e: Error| e.in_stage("clustering");
    let raw = FeatureTable::from_coefficients(&gwr.names, &gwr.beta, cc.include_intercept)
        .map_err(cluster_stage)?;
    let features = if cc.standardize {
        raw.standardized()
    } else {
        raw
    };
    let options = KMeansOptions {
        seed: cc.seed,
        n_restarts: cc.restarts,
        max_iter: cc.max_iter,
        init: cc.init,
    };
    let (result, per_k) = match cc.k {
        Some(k) => {
            let res = kmeans(&features, k, &options).map_err(cluster_stage)?;
            let per_k = res
                .silhouette_mean
                .map(|s| vec![(k, s)])
                .unwrap_or_default();
            (res, per_k)
        }
        None => {
            let sel = select_k(&features, cc.k_min, cc.k_max, &options).map_err(cluster_stage)?;
            (sel.best, sel.silhouettes)
        }
    };
    let (labels, _centroids) = canonical_labels(&result.labels, &result.centroids);
    let mut sizes = vec![0usize; result.k];
    for &l in &labels {
        sizes[l] += 1;
    }
    let clusters = ClusterSummary {
        k: result.k,
        wss: result.wss,
        silhouette_mean: result.silhouette_mean,
        per_k_silhouettes: per_k
            .into_iter()
            .map(|(k, silhouette)| KSilhouette { k, silhouette })
            .collect(),
        sizes,
        features: features.names.clone(),
        standardized: cc.standardize,
        include_intercept: cc.include_intercept,
        iterations: result.iterations,
        converged: result.converged,
    };

    let p = design.p();
    let n = design.n() as f64;
    let table1 = (0..p)
        .map(|j| {
            let col = gwr.beta.iter().map(|b| b[j]);
            TermSummary {
                term: gwr.names[j].clone(),
                gwr_mean: col.clone().sum::<f64>() / n,
                gwr_min: col.clone().fold(f64::INFINITY, f64::min),
                gwr_max: col.fold(f64::NEG_INFINITY, f64::max),
                ols_coefficient: ols.coefficients[j],
                ols_p_value: ols.p_values[j],
            }
        })
        .collect();
    let ols_rows = (0..p)
        .map(|j| OlsRow {
            term: ols.names[j].clone(),
            coefficient: ols.coefficients[j],
            std_error: ols.std_errors[j],
            t_value: ols.t_values[j],
            p_value: ols.p_values[j],
        })
        .collect();
    let all_ids = data.all_regions.ids();
    let summary = ModelSummary {
        response: config.model.response.clone(),
        n_regions: design.n(),
        n_excluded: data.all_regions.len() - design.n(),
        excluded_regions: data
            .excluded()
            .iter()
            .map(|&i| all_ids[i].clone())
            .collect(),
        terms: gwr.names.clone(),
        kernel: gwr.kernel,
        bandwidth_selection: selection,
        cv_score: gwr.cv_score,
        quasi_global_r2: gwr.quasi_global_r2,
        local_r2_min: gwr.local_r2.iter().copied().fold(f64::INFINITY, f64::min),
        local_r2_max: gwr
            .local_r2
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        local_r2_mean: gwr.local_r2.iter().sum::<f64>() / n,
        ols_r2: ols.r2,
        ols_sigma2: ols.sigma2,
        ols: ols_rows,
        table1,
        moran_response: moran_response.clone(),
        moran_residuals: moran_residuals.clone(),
    };
    Ok(Analysis {
        ols,
        gwr,
        moran_response,
        moran_residuals,
        labels,
        clusters,
        summary,
    })
}

fn file_stem(term: &str) -> String {
    term.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serialises");
    s.push('\n');
    s
}

/// Every output artifact as `(file name, contents)`.
pub fn render_outputs(
    data: &PreparedData,
    analysis: &Analysis,
    config: &PipelineConfig,
) -> Result<Vec<(String, String)>> {
    let gwr = &analysis.gwr;
    let ids = data.regions.ids();
    let mut files = Vec::new();

    let mut coef = String::from("region_id");
    for name in &gwr.names {
        let _ = write!(coef, ",beta_{name}");
    }
    coef.push_str(",local_r2,residual\n");
    for (i, id) in ids.iter().enumerate() {
        coef.push_str(id);
        for b in &gwr.beta[i] {
            let _ = write!(coef, ",{b}");
        }
        let _ = writeln!(coef, ",{},{}", gwr.local_r2[i], gwr.residuals[i]);
    }
    files.push(("coefficients.csv".to_string(), coef));

    files.push(("model.json".to_string(), json_pretty(&analysis.summary)));

    let mut table1 = String::from("term,gwr_mean,gwr_min,gwr_max,ols_coefficient,ols_p_value\n");
    for t in &analysis.summary.table1 {
        let _ = writeln!(
            table1,
            "{},{},{},{},{},{}",
            t.term, t.gwr_mean, t.gwr_min, t.gwr_max, t.ols_coefficient, t.ols_p_value
        );
    }
    files.push(("table1.csv".to_string(), table1));

    let mut clusters = String::from("region_id,cluster\n");
    for (id, l) in ids.iter().zip(&analysis.labels) {
        let _ = writeln!(clusters, "{id},{l}");
    }
    files.push(("clusters.csv".to_string(), clusters));
    files.push(("clusters.json".to_string(), json_pretty(&analysis.clusters)));

    let all_ids = data.all_regions.ids();
    files.push((
        "imputation_report.csv".to_string(),
        data.report.to_csv(&all_ids, &data.missing_response),
    ));
    files.push(("adjacency.csv".to_string(), data.graph.to_edge_csv(&ids)));

    let geojson = regions_to_geojson(&data.regions, |i| {
        let mut props = vec![("cluster".to_string(), Value::from(analysis.labels[i]))];
        for (name, b) in gwr.names.iter().zip(&gwr.beta[i]) {
            props.push((format!("beta_{name}"), Value::from(*b)));
        }
        props.push(("local_r2".into(), Value::from(gwr.local_r2[i])));
        props.push(("residual".into(), Value::from(gwr.residuals[i])));
        props
    });
    files.push(("regions_annotated.geojson".to_string(), geojson));

    let out = &config.output;
    let map_stage = |e: Error| e.in_stage("render");
    files.push((
        "map_response.svg".to_string(),
        render_choropleth(
            &data.regions,
            data.design.y(),
            out.classes,
            out.palette,
            &config.model.response,
        )
        .map_err(map_stage)?,
    ));
    for (j, name) in gwr.names.iter().enumerate() {
        let values: Vec<f64> = gwr.beta.iter().map(|b| b[j]).collect();
        files.push((
            format!("map_beta_{}.svg", file_stem(name)),
            render_choropleth(
                &data.regions,
                &values,
                out.classes,
                out.coefficient_palette,
                &format!("GWR {name}"),
            )
            .map_err(map_stage)?,
        ));
    }
    files.push((
        "map_local_r2.svg".to_string(),
        render_choropleth(
            &data.regions,
            &gwr.local_r2,
            out.classes,
            out.palette,
            "local R²",
        )
        .map_err(map_stage)?,
    ));
    files.push((
        "map_clusters.svg".to_string(),
        render_categorical(&data.regions, &analysis.labels, "clusters").map_err(map_stage)?,
    ));
    Ok(files)
}

/// Writes all files, removing the ones already written if any write fails.
fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, body) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(Error::io(path.display().to_string(), e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Runs every stage, then writes the artifacts into `config.output.dir`.
/// Nothing is written unless all stages succeed.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    let prepared = prepare_data(config)?;
    let analysis = analyze(&prepared, config)?;
    let outputs = render_outputs(&prepared, &analysis, config)?;
    let files = write_all(&config.output.dir, &outputs).map_err(|e| e.in_stage("export"))?;
    Ok(PipelineOutput {
        files,
        analysis,
        prepared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_parsing() {
        assert_eq!(parse_cell(" 2.5 "), AttrValue::Number(2.5));
        assert_eq!(parse_cell(""), AttrValue::Missing);
        assert_eq!(parse_cell("NA"), AttrValue::Missing);
        assert_eq!(parse_cell("major"), AttrValue::Category("major".into()));
    }

    #[test]
    fn canonical_relabel() {
        let (labels, c) = canonical_labels(&[2, 2, 0, 1], &[vec![0.0], vec![1.0], vec![2.0]]);
        assert_eq!(labels, vec![0, 0, 1, 2]);
        assert_eq!(c, vec![vec![2.0], vec![0.0], vec![1.0]]);
    }

    #[test]
    fn file_stems() {
        assert_eq!(
            file_stem("remoteness_outer regional"),
            "remoteness_outer_regional"
        );
    }
}
