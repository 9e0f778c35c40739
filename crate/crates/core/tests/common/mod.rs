//! Brute-force oracles shared by the integration suites. Each one is written
//! independently of the library code it checks.

#![allow(dead_code)]

use geoclust::geometry::AdjacencyGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// `[XᵀWX]⁻¹ XᵀWy` through the normal equations.
pub fn weighted_normal_equations(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let p = x[0].len();
    let mut xtwx = vec![vec![0.0; p]; p];
    let mut xtwy = vec![0.0; p];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        for a in 0..p {
            xtwy[a] += wi * row[a] * yi;
            for b in 0..p {
                xtwx[a][b] += wi * row[a] * row[b];
            }
        }
    }
    solve_dense(xtwx, xtwy)
}

pub fn max_relative_error(got: &[f64], want: &[f64]) -> f64 {
    let scale = want
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Moran's I from the dense double sum over a materialised weight matrix.
pub fn moran_double_sum(values: &[f64], graph: &AdjacencyGraph, row_standardize: bool) -> f64 {
    let n = values.len();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        let deg = graph.neighbors(i).len() as f64;
        for &j in graph.neighbors(i) {
            w[i][j] = if row_standardize { 1.0 / deg } else { 1.0 };
        }
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let s0: f64 = w.iter().flatten().sum();
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            num += w[i][j] * z[i] * z[j];
        }
    }
    let den: f64 = z.iter().map(|v| v * v).sum();
    n as f64 / s0 * num / den
}

/// Smallest within-cluster sum of squares over every split into two
/// nonempty groups.
pub fn exhaustive_two_partition_wss(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let m = points[0].len();
    let group_ss = |members: &[&Vec<f64>]| -> f64 {
        let c: Vec<f64> = (0..m)
            .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
            .collect();
        members
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum()
    };
    let mut best = f64::INFINITY;
    // Point 0 always sits in group A, so each split is visited once.
    for mask in 0..(1u32 << (n - 1)) {
        let mut a = vec![&points[0]];
        let mut b = Vec::new();
        for (i, p) in points.iter().enumerate().skip(1) {
            if mask & (1 << (i - 1)) != 0 {
                b.push(p);
            } else {
                a.push(p);
            }
        }
        if b.is_empty() {
            continue;
        }
        best = best.min(group_ss(&a) + group_ss(&b));
    }
    best
}

/// Isotropic Gaussian blobs in the plane, `per_blob` points each.
pub fn blobs(centers: &[[f64; 2]], sd: f64, per_blob: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for c in centers {
        for _ in 0..per_blob {
            let dx: f64 = StandardNormal.sample(&mut r);
            let dy: f64 = StandardNormal.sample(&mut r);
            out.push(vec![c[0] + sd * dx, c[1] + sd * dy]);
        }
    }
    out
}

/// Random undirected graph with edge probability `p`, at least one edge.
pub fn random_graph(n: usize, p: f64, r: &mut ChaCha8Rng) -> AdjacencyGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    AdjacencyGraph::from_edges(n, &edges).unwrap()
}

/// Rook-or-corner grid neighbors computed from cell coordinates.
pub fn grid_queen_oracle(width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); width * height];
    for r in 0..height {
        for c in 0..width {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr >= 0 && cc >= 0 && (rr as usize) < height && (cc as usize) < width {
                        out[r * width + c].push(rr as usize * width + cc as usize);
                    }
                }
            }
            out[r * width + c].sort_unstable();
        }
    }
    out
}
