use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geoclust::geometry::{load_regions, AttrValue};
use geoclust::pipeline::{
    render_choropleth, run_moran, run_pipeline, write_synthetic, Palette, PipelineConfig, Surface,
    SyntheticSpec,
};
use geoclust::{init_thread_pool, Error, Result};

#[derive(Parser)]
#[command(
    name = "geoclust",
    version,
    about = "GWR, Moran's I and coefficient clustering for areal data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a TOML config.
    Run { config: PathBuf },
    /// Write a synthetic grid dataset with a ready-to-run config.
    Synth {
        #[arg(long, default_value_t = 10)]
        width: usize,
        #[arg(long, default_value_t = 10)]
        height: usize,
        #[arg(long, default_value = "two-block")]
        surface: Surface,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Horizontal gap between the halves of a two-block grid.
        #[arg(long, default_value_t = 0.0)]
        gap: f64,
        #[arg(long, default_value = "synthetic")]
        out: PathBuf,
    },
    /// Print the Moran's I permutation test of the response as JSON.
    Moran { config: PathBuf },
    /// Render one numeric column as an SVG choropleth.
    Render {
        values: PathBuf,
        regions: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, default_value = "region_id")]
        id_column: String,
        #[arg(long, default_value = "id")]
        id_property: String,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value = "viridis")]
        palette: Palette,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn render_command(
    values: &PathBuf,
    regions: &PathBuf,
    column: &str,
    id_column: &str,
    id_property: &str,
    classes: usize,
    palette: Palette,
    title: Option<&str>,
) -> Result<String> {
    let bytes = std::fs::read(regions)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", regions.display())))?;
    let set = load_regions(&bytes, id_property)?;
    let mut reader = csv::Reader::from_path(values)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{} has no `{name}` column", values.display())))
    };
    let (id_idx, col_idx) = (find(id_column)?, find(column)?);
    let mut by_id = std::collections::HashMap::new();
    for record in reader.records() {
        let record = record?;
        let raw = record.get(col_idx).unwrap_or("").trim();
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::Config(format!("non-numeric value `{raw}` in `{column}`")))?;
        by_id.insert(record.get(id_idx).unwrap_or("").trim().to_string(), v);
    }
    let mut kept = Vec::new();
    let mut vals = Vec::new();
    for (i, r) in set.iter().enumerate() {
        let v = by_id.get(&r.id).copied().or(match r.attr(column) {
            AttrValue::Number(v) => Some(*v),
            _ => None,
        });
        if let Some(v) = v {
            kept.push(i);
            vals.push(v);
        }
    }
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "no region has a value for `{column}`"
        )));
    }
    render_choropleth(
        &set.subset(&kept),
        &vals,
        classes,
        palette,
        title.unwrap_or(column),
    )
}

fn execute(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let out = run_pipeline(&cfg)?;
            let s = &out.analysis.summary;
            println!(
                "{} regions ({} excluded), {}, quasi-global R² {:.4}, k = {}",
                s.n_regions,
                s.n_excluded,
                describe_kernel(&s.kernel),
                s.quasi_global_r2,
                out.analysis.clusters.k
            );
            for file in &out.files {
                println!("wrote {}", file.display());
            }
        }
        Command::Synth {
            width,
            height,
            surface,
            noise,
            seed,
            gap,
            out,
        } => {
            let spec = SyntheticSpec {
                width,
                height,
                surface,
                noise_sd: noise,
                seed,
                block_gap: gap,
            };
            write_synthetic(&spec, &out)?;
            println!("wrote synthetic {width}x{height} grid to {}", out.display());
        }
        Command::Moran { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let result = run_moran(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&result).expect("result serialises")
            );
        }
        Command::Render {
            values,
            regions,
            column,
            id_column,
            id_property,
            classes,
            palette,
            title,
            out,
        } => {
            let svg = render_command(
                &values,
                &regions,
                &column,
                &id_column,
                &id_property,
                classes,
                palette,
                title.as_deref(),
            )?;
            match out {
                Some(path) => std::fs::write(&path, svg)
                    .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{svg}"),
            }
        }
    }
    Ok(())
}

fn describe_kernel(spec: &geoclust::kernel::KernelSpec) -> String {
    use geoclust::kernel::KernelSpec::*;
    match spec {
        FixedGaussian { bandwidth } => format!("fixed Gaussian b = {bandwidth:.4}"),
        AdaptiveBisquare { neighbors } => format!("adaptive bisquare k = {neighbors}"),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
