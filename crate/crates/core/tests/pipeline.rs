use std::path::Path;
use std::process::Command;

use serde_json::json;

use geoclust::cluster::agreement_accuracy;
use geoclust::pipeline::{
    run_pipeline, write_synthetic, CovariateConfig, PipelineConfig, Surface, SyntheticData,
    SyntheticSpec,
};
use geoclust::Error;

fn square(id: &str, x: f64, y: f64) -> serde_json::Value {
    json!({
        "type": "Feature",
        "properties": {"id": id},
        "geometry": {"type": "Polygon", "coordinates": [[[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0], [x, y]]]}
    })
}

/// 4×4 grid plus one detached square `island` far to the right.
fn grid_with_island(dir: &Path, rows: &[(String, String, String, String)]) -> PipelineConfig {
    let mut features = Vec::new();
    for r in 0..4 {
        for c in 0..4 {
            features.push(square(&format!("g{}", r * 4 + c), c as f64, r as f64));
        }
    }
    features.push(square("island", 20.0, 20.0));
    let doc = json!({"type": "FeatureCollection", "features": features});
    std::fs::write(dir.join("regions.geojson"), doc.to_string()).unwrap();
    let mut csv = String::from("region_id,y,x1,kind\n");
    for (id, y, x1, kind) in rows {
        csv.push_str(&format!("{id},{y},{x1},{kind}\n"));
    }
    std::fs::write(dir.join("covariates.csv"), csv).unwrap();
    let mut cfg = SyntheticData::default_config();
    cfg.model.covariates = vec![CovariateConfig::continuous("x1")];
    cfg.moran.permutations = 99;
    cfg.clustering.k = Some(2);
    cfg.resolve_paths(dir);
    cfg
}

fn island_rows() -> Vec<(String, String, String, String)> {
    let mut rows: Vec<_> = (0..16)
        .map(|i| {
            let x1 = ((i * 7) % 5) as f64 - 2.0;
            let y = 1.0 + 2.0 * x1 + (i % 4) as f64 * 0.3 - (i / 4) as f64 * 0.2;
            let kind = if i % 3 == 0 { "a" } else { "b" };
            (
                format!("g{i}"),
                y.to_string(),
                x1.to_string(),
                kind.to_string(),
            )
        })
        .collect();
    rows.push(("island".into(), "3.0".into(), "".into(), "a".into()));
    rows
}

#[test]
fn isolated_region_with_missing_covariate_is_excluded() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rows = island_rows();
    // One gap inside the grid that neighbors can fill, one response gap.
    rows[5].2 = "NA".into();
    rows[9].1 = "".into();
    let cfg = grid_with_island(tmp.path(), &rows);
    let out = run_pipeline(&cfg).unwrap();
    let summary = &out.analysis.summary;
    assert_eq!(summary.n_regions, 15);
    assert_eq!(summary.excluded_regions, vec!["g9", "island"]);

    let report = std::fs::read_to_string(cfg.output.dir.join("imputation_report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "region_id,variable,action,value,neighbor_count");
    assert!(lines.iter().any(|l| l.starts_with("g5,x1,imputed,")));
    assert!(lines.contains(&"island,x1,unimputable,,0"));
    assert!(lines.contains(&"g9,y,excluded,,"));

    let coefs = std::fs::read_to_string(cfg.output.dir.join("coefficients.csv")).unwrap();
    assert_eq!(coefs.lines().count(), 16);
    assert!(!coefs.contains("island"));
}

#[test]
fn missing_column_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = grid_with_island(tmp.path(), &island_rows());
    cfg.model
        .covariates
        .push(CovariateConfig::continuous("income"));
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().contains("income"), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!cfg.output.dir.exists());
}

#[test]
fn categorical_covariate_gets_dummy_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = grid_with_island(tmp.path(), &island_rows());
    cfg.model
        .covariates
        .push(CovariateConfig::categorical("kind", Some("b")));
    cfg.gwr.kernel = geoclust::kernel::KernelKind::FixedGaussian;
    cfg.gwr.bandwidth = Some(1e6);
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(
        out.analysis.summary.terms,
        vec!["intercept", "x1", "kind_a"]
    );

    cfg.model.covariates[1] = CovariateConfig::categorical("kind", Some("zzz"));
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().contains("zzz"), "{err}");
}

#[test]
fn duplicate_covariate_rows_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rows = island_rows();
    rows.push(rows[0].clone());
    let cfg = grid_with_island(tmp.path(), &rows);
    match run_pipeline(&cfg).unwrap_err() {
        Error::Stage { source, .. } => {
            assert!(matches!(*source, Error::DuplicateIds(ref ids) if ids == &["g0"]))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn separated_blocks_cluster_into_their_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::new(10, 10, Surface::TwoBlock);
    spec.block_gap = 50.0;
    spec.noise_sd = 0.05;
    spec.seed = 11;
    let data = write_synthetic(&spec, tmp.path()).unwrap();
    let mut cfg = PipelineConfig::load(&tmp.path().join("config.toml")).unwrap();
    cfg.moran.permutations = 199;
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.analysis.clusters.k, 2);
    assert_eq!(
        agreement_accuracy(&out.analysis.labels, &data.block).unwrap(),
        1.0
    );
    for (beta, truth) in out.analysis.gwr.beta.iter().zip(&data.beta) {
        for (b, t) in beta.iter().zip(truth) {
            assert!((b - t).abs() < 0.2, "{beta:?} vs {truth:?}");
        }
    }
}

#[test]
fn synthetic_config_round_trips() {
    let cfg = SyntheticData::default_config();
    let text = cfg.to_toml().unwrap();
    assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn numerical_failure_names_region_and_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic(&SyntheticSpec::new(5, 5, Surface::Constant), tmp.path()).unwrap();
    let mut cfg = PipelineConfig::from_toml(
        &std::fs::read_to_string(tmp.path().join("config.toml")).unwrap(),
    )
    .unwrap();
    cfg.gwr.kernel = geoclust::kernel::KernelKind::FixedGaussian;
    cfg.gwr.bandwidth = Some(1e-3);
    let path = tmp.path().join("tiny.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_geoclust"))
        .arg("run")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("r0000"), "{stderr}");
}

#[test]
fn moran_subcommand_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::new(6, 6, Surface::SmoothGradient);
    spec.noise_sd = 0.1;
    write_synthetic(&spec, tmp.path()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_geoclust"))
        .arg("moran")
        .arg(tmp.path().join("config.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys.len(), 6);
    for k in [
        "statistic",
        "expectation",
        "p_value",
        "n_permutations",
        "seed",
        "row_standardized",
    ] {
        assert!(keys.contains(&k));
    }
}
