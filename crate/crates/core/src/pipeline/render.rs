//! Static SVG choropleths with quantile classes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RegionSet;

const MAP_SIZE: f64 = 600.0;
const PAD: f64 = 10.0;
const LEGEND_WIDTH: f64 = 220.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    Viridis,
    Blues,
    /// Diverging red-white-blue.
    RdBu,
    /// Qualitative colors for cluster labels.
    Categorical,
}

impl std::str::FromStr for Palette {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "viridis" => Ok(Palette::Viridis),
            "blues" => Ok(Palette::Blues),
            "rdbu" => Ok(Palette::RdBu),
            "categorical" => Ok(Palette::Categorical),
            other => Err(Error::InvalidArgument(format!("unknown palette `{other}`"))),
        }
    }
}

const VIRIDIS: [(u8, u8, u8); 5] = [
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
];
const BLUES: [(u8, u8, u8); 3] = [(239, 243, 255), (107, 174, 214), (8, 69, 148)];
const RDBU: [(u8, u8, u8); 5] = [
    (202, 0, 32),
    (244, 165, 130),
    (247, 247, 247),
    (146, 197, 222),
    (5, 113, 176),
];
const CATEGORICAL: [(u8, u8, u8); 10] = [
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
    (188, 189, 34),
    (23, 190, 207),
];

impl Palette {
    /// `count` colors spread evenly over the palette.
    pub fn colors(&self, count: usize) -> Vec<String> {
        if *self == Palette::Categorical {
            return (0..count)
                .map(|i| hex(CATEGORICAL[i % CATEGORICAL.len()]))
                .collect();
        }
        let stops: &[(u8, u8, u8)] = match self {
            Palette::Viridis => &VIRIDIS,
            Palette::Blues => &BLUES,
            Palette::RdBu => &RDBU,
            Palette::Categorical => unreachable!(),
        };
        (0..count)
            .map(|i| {
                let t = if count == 1 {
                    0.5
                } else {
                    i as f64 / (count - 1) as f64
                };
                hex(interpolate(stops, t))
            })
            .collect()
    }
}

fn hex((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn interpolate(stops: &[(u8, u8, u8)], t: f64) -> (u8, u8, u8) {
    let x = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    let (a, b) = (stops[i], stops[i + 1]);
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Class bounds `b₀ ≤ … ≤ b_c` at quantiles `0, 1/c, …, 1`, with repeated
/// bounds collapsed. A constant field yields the single pair `[v, v]`.
pub fn quantile_breaks(values: &[f64], classes: usize) -> Result<Vec<f64>> {
    if values.is_empty() || classes == 0 {
        return Err(Error::InvalidArgument(
            "quantile breaks need values and classes".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "cannot class non-finite values".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut breaks: Vec<f64> = (0..=classes)
        .map(|c| quantile(&sorted, c as f64 / classes as f64))
        .collect();
    breaks.dedup();
    if breaks.len() == 1 {
        breaks.push(breaks[0]);
    }
    Ok(breaks)
}

/// Class index: first class whose upper bound is `>= v`.
pub fn class_of(v: f64, breaks: &[f64]) -> usize {
    let classes = breaks.len() - 1;
    (0..classes)
        .find(|&c| v <= breaks[c + 1])
        .unwrap_or(classes - 1)
}

fn fmt_value(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e5) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(regions: &RegionSet) -> Frame {
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in regions
            .iter()
            .flat_map(|r| r.rings.iter())
            .flat_map(|ring| ring.points.iter())
        {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let span = (max_x - min_x).max(max_y - min_y).max(f64::MIN_POSITIVE);
        let scale = MAP_SIZE / span;
        Frame {
            min_x,
            max_y,
            scale,
            width: (max_x - min_x) * scale + 2.0 * PAD,
            height: ((max_y - min_y) * scale + 2.0 * PAD).max(140.0),
        }
    }

    fn path(&self, region: &crate::geometry::Region) -> String {
        let mut d = String::new();
        for ring in &region.rings {
            for (k, p) in ring.points.iter().enumerate() {
                let x = PAD + (p.x - self.min_x) * self.scale;
                let y = PAD + (self.max_y - p.y) * self.scale;
                let _ = write!(d, "{}{x:.2} {y:.2} ", if k == 0 { "M" } else { "L" });
            }
            d.push_str("Z ");
        }
        d.trim_end().to_string()
    }
}

struct LegendEntry {
    color: String,
    label: String,
}

fn document(
    regions: &RegionSet,
    fills: &[(String, String)],
    title: &str,
    legend: &[LegendEntry],
    note: Option<&str>,
) -> String {
    let frame = Frame::new(regions);
    let total_width = frame.width + LEGEND_WIDTH;
    let legend_height = 40.0 + 20.0 * legend.len() as f64 + if note.is_some() { 20.0 } else { 0.0 };
    let height = frame.height.max(legend_height + PAD);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_width:.0}" height="{height:.0}" viewBox="0 0 {total_width:.2} {height:.2}">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(
        svg,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<g stroke="#333333" stroke-width="0.5" fill-rule="evenodd">"##
    );
    for (region, (color, tooltip)) in regions.iter().zip(fills) {
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="{color}"><title>{}</title></path>"#,
            frame.path(region),
            escape(tooltip)
        );
    }
    svg.push_str("</g>\n");
    let lx = frame.width + 10.0;
    let _ = writeln!(svg, r#"<g font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(
        svg,
        r#"<text x="{lx:.2}" y="24" font-weight="bold">{}</text>"#,
        escape(title)
    );
    for (k, entry) in legend.iter().enumerate() {
        let y = 40.0 + 20.0 * k as f64;
        let _ = writeln!(
            svg,
            r##"<rect x="{lx:.2}" y="{y:.2}" width="14" height="14" fill="{}" stroke="#333333" stroke-width="0.5"/>"##,
            entry.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            y + 11.0,
            escape(&entry.label)
        );
    }
    if let Some(note) = note {
        let y = 40.0 + 20.0 * legend.len() as f64 + 11.0;
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.2}" y="{y:.2}" font-style="italic">{}</text>"#,
            escape(note)
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

/// Quantile-classed choropleth of one value per region.
pub fn render_choropleth(
    regions: &RegionSet,
    values: &[f64],
    classes: usize,
    palette: Palette,
    title: &str,
) -> Result<String> {
    if values.len() != regions.len() {
        return Err(Error::Dimension {
            expected: regions.len(),
            actual: values.len(),
            context: "map values vs regions",
        });
    }
    let breaks = quantile_breaks(values, classes)?;
    let n_classes = breaks.len() - 1;
    let constant = breaks[0] == breaks[1] && n_classes == 1;
    let colors = palette.colors(n_classes);
    let fills: Vec<(String, String)> = regions
        .iter()
        .zip(values)
        .map(|(r, &v)| {
            (
                colors[class_of(v, &breaks)].clone(),
                format!("{}: {}", r.id, fmt_value(v)),
            )
        })
        .collect();
    let legend: Vec<LegendEntry> = (0..n_classes)
        .map(|c| LegendEntry {
            color: colors[c].clone(),
            label: format!("{} – {}", fmt_value(breaks[c]), fmt_value(breaks[c + 1])),
        })
        .collect();
    Ok(document(
        regions,
        &fills,
        title,
        &legend,
        constant.then_some("all values equal"),
    ))
}

/// Map of discrete labels (e.g. cluster membership).
pub fn render_categorical(regions: &RegionSet, labels: &[usize], title: &str) -> Result<String> {
    if labels.len() != regions.len() {
        return Err(Error::Dimension {
            expected: regions.len(),
            actual: labels.len(),
            context: "map labels vs regions",
        });
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let colors = Palette::Categorical.colors(k);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let fills: Vec<(String, String)> = regions
        .iter()
        .zip(labels)
        .map(|(r, &l)| (colors[l].clone(), format!("{}: cluster {}", r.id, l)))
        .collect();
    let legend: Vec<LegendEntry> = (0..k)
        .map(|c| LegendEntry {
            color: colors[c].clone(),
            label: format!("cluster {c} (n = {})", sizes[c]),
        })
        .collect();
    Ok(document(regions, &fills, title, &legend, None))
}
