//! Areal units: GeoJSON ingestion, centroids, queen contiguity and
//! inter-centroid distances.
//!
//! Coordinates are planar. Geographic (lon/lat) inputs must be projected
//! before they reach this module; distances are plain Euclidean.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};

/// Vertex snapping cell size used when none is configured.
pub const DEFAULT_SNAP_TOL: f64 = 1e-9;

/// Areas below this are treated as degenerate.
const MIN_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A closed ring. `hole` marks interior rings, whose area is subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub points: Vec<Point>,
    pub hole: bool,
}

impl Ring {
    pub fn exterior(points: Vec<Point>) -> Self {
        Ring {
            points,
            hole: false,
        }
    }

    pub fn hole(points: Vec<Point>) -> Self {
        Ring { points, hole: true }
    }

    /// Shoelace signed area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
            .sum::<f64>()
            / 2.0
    }

    /// Centroid of the ring's enclosed area, or `None` for a zero-area ring.
    fn area_centroid(&self) -> Option<Point> {
        let a = self.signed_area();
        if a.abs() < MIN_AREA {
            return None;
        }
        // Work relative to the first vertex to limit cancellation on
        // large projected coordinates.
        let o = self.points[0];
        let (mut cx, mut cy) = (0.0, 0.0);
        for w in self.points.windows(2) {
            let (x0, y0) = (w[0].x - o.x, w[0].y - o.y);
            let (x1, y1) = (w[1].x - o.x, w[1].y - o.y);
            let cross = x0 * y1 - x1 * y0;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        Some(Point::new(o.x + cx / (6.0 * a), o.y + cy / (6.0 * a)))
    }

    fn validate(&self, feature: &str) -> Result<()> {
        let invalid = |reason: String| Error::InvalidGeometry {
            feature: feature.to_string(),
            reason,
        };
        if self.points.len() < 4 {
            return Err(invalid(format!(
                "ring has {} vertices, at least 4 required",
                self.points.len()
            )));
        }
        if self.points.first() != self.points.last() {
            return Err(invalid("ring is not closed".into()));
        }
        if self
            .points
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(invalid("non-finite coordinate".into()));
        }
        if !self.hole && self.signed_area() == 0.0 {
            return Err(invalid("exterior ring has zero area".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Number(f64),
    Category(String),
    Missing,
}

impl AttrValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, AttrValue::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    pub name: String,
    pub rings: Vec<Ring>,
    pub centroid: Point,
    pub attributes: BTreeMap<String, AttrValue>,
}

impl Region {
    /// Builds a region and computes its centroid.
    pub fn new(id: impl Into<String>, rings: Vec<Ring>) -> Result<Self> {
        let id = id.into();
        for ring in &rings {
            ring.validate(&id)?;
        }
        let mut region = Region {
            name: id.clone(),
            id,
            rings,
            centroid: Point::new(0.0, 0.0),
            attributes: BTreeMap::new(),
        };
        region.centroid = polygon_centroid(&region)?;
        Ok(region)
    }

    /// Attribute lookup; absent keys read as missing.
    pub fn attr(&self, name: &str) -> &AttrValue {
        self.attributes.get(name).unwrap_or(&AttrValue::Missing)
    }

    /// Net area: exterior rings minus holes.
    pub fn area(&self) -> f64 {
        self.rings
            .iter()
            .map(|r| {
                if r.hole {
                    -r.signed_area().abs()
                } else {
                    r.signed_area().abs()
                }
            })
            .sum()
    }

    fn translate(&mut self, dx: f64, dy: f64) {
        for ring in &mut self.rings {
            for p in &mut ring.points {
                p.x += dx;
                p.y += dy;
            }
        }
        self.centroid.x += dx;
        self.centroid.y += dy;
    }
}

/// An ordered collection of regions with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionSet {
    regions: Vec<Region>,
}

impl RegionSet {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for r in &regions {
            *seen.entry(r.id.as_str()).or_default() += 1;
        }
        let mut dups: Vec<String> = seen
            .into_iter()
            .filter(|(_, c)| *c > 1)
            .map(|(id, _)| id.to_string())
            .collect();
        if !dups.is_empty() {
            dups.sort();
            return Err(Error::DuplicateIds(dups));
        }
        Ok(RegionSet { regions })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn regions_mut(&mut self) -> &mut [Region] {
        &mut self.regions
    }

    pub fn get(&self, index: usize) -> Option<&Region> {
        self.regions.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Region> {
        self.regions.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    pub fn centroids(&self) -> Vec<Point> {
        self.regions.iter().map(|r| r.centroid).collect()
    }

    /// Keeps the regions at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> RegionSet {
        RegionSet {
            regions: indices.iter().map(|&i| self.regions[i].clone()).collect(),
        }
    }

    /// Shifts every coordinate and centroid by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> RegionSet {
        let mut out = self.clone();
        for r in &mut out.regions {
            r.translate(dx, dy);
        }
        out
    }
}

/// Parses a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
///
/// The region id is read from the feature property `id_property`
/// (falling back to the feature-level `id` member). Remaining properties
/// become attributes; `null` is recorded as missing.
pub fn load_regions(geojson: &[u8], id_property: &str) -> Result<RegionSet> {
    let root: Value = serde_json::from_slice(geojson).map_err(|e| Error::Parse {
        offset: byte_offset(geojson, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let parse_err = |message: &str| Error::Parse {
        offset: 0,
        message: message.to_string(),
    };
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(parse_err("top-level object is not a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("FeatureCollection has no `features` array"))?;

    let mut regions = Vec::with_capacity(features.len());
    for (n, feature) in features.iter().enumerate() {
        let props = feature.get("properties").and_then(Value::as_object);
        let id = props
            .and_then(|p| p.get(id_property))
            .or_else(|| feature.get("id"))
            .and_then(json_to_label)
            .ok_or_else(|| Error::InvalidGeometry {
                feature: format!("#{n}"),
                reason: format!("missing `{id_property}` property"),
            })?;

        let geometry = feature.get("geometry").unwrap_or(&Value::Null);
        let kind = geometry
            .get("type")
            .and_then(Value::as_str)
            .unwrap_or("null");
        let coords = geometry.get("coordinates").unwrap_or(&Value::Null);
        let rings = match kind {
            "Polygon" => parse_polygon(coords, &id)?,
            "MultiPolygon" => {
                let parts = coords.as_array().ok_or_else(|| Error::InvalidGeometry {
                    feature: id.clone(),
                    reason: "MultiPolygon coordinates are not an array".into(),
                })?;
                let mut rings = Vec::new();
                for part in parts {
                    rings.extend(parse_polygon(part, &id)?);
                }
                rings
            }
            other => {
                return Err(Error::UnsupportedGeometry {
                    feature: id,
                    kind: other.to_string(),
                })
            }
        };
        if rings.is_empty() {
            return Err(Error::InvalidGeometry {
                feature: id,
                reason: "no rings".into(),
            });
        }

        let mut region = Region::new(id.clone(), rings)?;
        if let Some(props) = props {
            for (key, value) in props {
                if key == id_property {
                    continue;
                }
                let attr = match value {
                    Value::Null => AttrValue::Missing,
                    Value::Number(x) => x.as_f64().map_or(AttrValue::Missing, AttrValue::Number),
                    Value::String(s) => AttrValue::Category(s.clone()),
                    Value::Bool(b) => AttrValue::Category(b.to_string()),
                    _ => continue,
                };
                region.attributes.insert(key.clone(), attr);
            }
            if let Some(name) = props.get("name").and_then(Value::as_str) {
                region.name = name.to_string();
            }
        }
        regions.push(region);
    }
    RegionSet::new(regions)
}

fn json_to_label(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut current = 1;
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if current == line {
            break;
        }
        if b == b'\n' {
            current += 1;
            start = i + 1;
        }
    }
    (start + column.saturating_sub(1)).min(bytes.len())
}

fn parse_polygon(coords: &Value, feature: &str) -> Result<Vec<Ring>> {
    let invalid = |reason: &str| Error::InvalidGeometry {
        feature: feature.to_string(),
        reason: reason.to_string(),
    };
    let rings = coords
        .as_array()
        .ok_or_else(|| invalid("polygon coordinates are not an array"))?;
    rings
        .iter()
        .enumerate()
        .map(|(k, ring)| {
            let pts = ring
                .as_array()
                .ok_or_else(|| invalid("ring is not an array"))?
                .iter()
                .map(|pos| {
                    let pos = pos
                        .as_array()
                        .ok_or_else(|| invalid("position is not an array"))?;
                    match (
                        pos.first().and_then(Value::as_f64),
                        pos.get(1).and_then(Value::as_f64),
                    ) {
                        (Some(x), Some(y)) => Ok(Point::new(x, y)),
                        _ => Err(invalid("position needs two numeric coordinates")),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Ring {
                points: pts,
                hole: k > 0,
            })
        })
        .collect()
}

/// Area-weighted centroid over all rings; holes subtract.
pub fn polygon_centroid(region: &Region) -> Result<Point> {
    let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
    for ring in &region.rings {
        let a = ring.signed_area().abs();
        let Some(c) = ring.area_centroid() else {
            continue;
        };
        let a = if ring.hole { -a } else { a };
        area += a;
        mx += a * c.x;
        my += a * c.y;
    }
    if area.abs() < MIN_AREA {
        return Err(Error::DegenerateGeometry {
            feature: region.id.clone(),
            area,
        });
    }
    Ok(Point::new(mx / area, my / area))
}

/// Symmetric, irreflexive neighbor structure over `n` regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    /// Builds a graph from neighbor lists, sorting them and checking
    /// symmetry, irreflexivity and the index domain.
    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if j >= n {
                    return Err(Error::IndexOutOfRange { index: j, len: n });
                }
                if j == i {
                    return Err(Error::InvalidArgument(format!("self-loop at {i}")));
                }
                if neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetric edge {i} -> {j}"
                    )));
                }
            }
        }
        Ok(AdjacencyGraph { neighbors })
    }

    /// Builds a graph from undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::IndexOutOfRange {
                    index: a.max(b),
                    len: n,
                });
            }
            lists[a].push(b);
            lists[b].push(a);
        }
        Self::from_neighbors(lists)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `i < j`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Graph induced on `keep`, reindexed to positions within `keep`.
    pub fn induced(&self, keep: &[usize]) -> AdjacencyGraph {
        let mut position = vec![usize::MAX; self.n()];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new;
        }
        let neighbors = keep
            .iter()
            .map(|&old| {
                let mut list: Vec<usize> = self.neighbors[old]
                    .iter()
                    .filter_map(|&j| (position[j] != usize::MAX).then_some(position[j]))
                    .collect();
                list.sort_unstable();
                list
            })
            .collect();
        AdjacencyGraph { neighbors }
    }

    /// CSV edge list `src_id,dst_id`, one line per undirected edge.
    pub fn to_edge_csv(&self, ids: &[String]) -> String {
        let mut out = String::from("src_id,dst_id\n");
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{},{}", ids[i], ids[j]);
        }
        out
    }
}

fn snap_key(p: &Point, tol: f64) -> (i64, i64) {
    if tol > 0.0 {
        ((p.x / tol).round() as i64, (p.y / tol).round() as i64)
    } else {
        // Exact matching; normalise -0.0 so it equals 0.0.
        ((p.x + 0.0).to_bits() as i64, (p.y + 0.0).to_bits() as i64)
    }
}

/// Queen contiguity: regions are neighbors when any of their ring vertices
/// coincide after snapping to a grid of cell size `snap_tol`.
pub fn queen_adjacency(regions: &RegionSet, snap_tol: f64) -> AdjacencyGraph {
    let n = regions.len();
    let mut owners: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, region) in regions.iter().enumerate() {
        for ring in &region.rings {
            for p in &ring.points {
                let entry = owners.entry(snap_key(p, snap_tol)).or_default();
                if entry.last() != Some(&idx) {
                    entry.push(idx);
                }
            }
        }
    }
    let mut neighbors = vec![Vec::new(); n];
    for owner in owners.values() {
        for (a, &i) in owner.iter().enumerate() {
            for &j in &owner[a + 1..] {
                if i != j {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    AdjacencyGraph { neighbors }
}

/// Dense symmetric matrix of inter-centroid distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_points(points: &[Point]) -> Self {
        let n = points.len();
        let data: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let pi = points[i];
                points.iter().map(move |pj| pi.distance(pj))
            })
            .collect();
        DistanceMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest strictly positive distance, if any.
    pub fn min_nonzero(&self) -> Option<f64> {
        self.data
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp)
    }

    pub fn subset(&self, indices: &[usize]) -> DistanceMatrix {
        let n = indices.len();
        let mut data = Vec::with_capacity(n * n);
        for &i in indices {
            for &j in indices {
                data.push(self.get(i, j));
            }
        }
        DistanceMatrix { n, data }
    }
}

/// Euclidean distances between region centroids.
pub fn distance_matrix(regions: &RegionSet) -> DistanceMatrix {
    DistanceMatrix::from_points(&regions.centroids())
}

/// Unit-square region with lower-left corner at `(x, y)`.
pub fn unit_square(id: impl Into<String>, x: f64, y: f64) -> Result<Region> {
    rectangle(id, x, y, x + 1.0, y + 1.0)
}

pub fn rectangle(id: impl Into<String>, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Region> {
    Region::new(
        id,
        vec![Ring::exterior(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
            Point::new(x0, y0),
        ])],
    )
}

/// `width` × `height` grid of unit squares, row-major from the origin.
pub fn square_grid(width: usize, height: usize) -> RegionSet {
    let mut regions = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let id = format!("r{:04}", row * width + col);
            regions.push(unit_square(id, col as f64, row as f64).expect("unit square is valid"));
        }
    }
    RegionSet::new(regions).expect("grid ids are unique")
}
