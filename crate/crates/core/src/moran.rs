//! Global Moran's I over binary contiguity weights with a permutation test.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AdjacencyGraph;

pub const DEFAULT_PERMUTATIONS: usize = 9999;
pub const MIN_PERMUTATIONS: usize = 99;

/// Permuted statistics within this distance of the observed one count as
/// "at least as extreme" (absorbs summation-order rounding).
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    #[serde(rename = "statistic")]
    pub observed_i: f64,
    #[serde(rename = "expectation")]
    pub expected_i: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
    pub row_standardized: bool,
}

/// Row weights `w_ij` for neighbors; zero rows for isolated regions.
struct Weights<'a> {
    graph: &'a AdjacencyGraph,
    row_weight: Vec<f64>,
    s0: f64,
}

impl<'a> Weights<'a> {
    fn new(graph: &'a AdjacencyGraph, row_standardize: bool) -> Self {
        let row_weight: Vec<f64> = (0..graph.n())
            .map(|i| match graph.degree(i) {
                0 => 0.0,
                d if row_standardize => 1.0 / d as f64,
                _ => 1.0,
            })
            .collect();
        let s0 = (0..graph.n())
            .map(|i| row_weight[i] * graph.degree(i) as f64)
            .sum();
        Weights {
            graph,
            row_weight,
            s0,
        }
    }

    /// `Σᵢ Σⱼ wᵢⱼ zᵢ zⱼ`.
    fn cross_product(&self, z: &[f64]) -> f64 {
        (0..self.graph.n())
            .map(|i| {
                let s: f64 = self.graph.neighbors(i).iter().map(|&j| z[j]).sum();
                self.row_weight[i] * z[i] * s
            })
            .sum()
    }
}

struct Prepared<'a> {
    weights: Weights<'a>,
    z: Vec<f64>,
    scale: f64,
}

fn prepare<'a>(
    values: &[f64],
    graph: &'a AdjacencyGraph,
    row_standardize: bool,
) -> Result<Prepared<'a>> {
    let n = values.len();
    if n != graph.n() {
        return Err(Error::Dimension {
            expected: graph.n(),
            actual: n,
            context: "Moran values vs adjacency graph",
        });
    }
    if n < 3 {
        return Err(Error::UndefinedStatistic(format!(
            "Moran's I needs n >= 3, got {n}"
        )));
    }
    if graph.edge_count() == 0 {
        return Err(Error::UndefinedStatistic(
            "Moran's I on a graph with no edges".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "Moran's I values must be finite".into(),
        ));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let m2: f64 = z.iter().map(|v| v * v).sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if m2 <= 1e-24 * sum_sq || m2 == 0.0 {
        return Err(Error::UndefinedStatistic(
            "Moran's I of a constant field".into(),
        ));
    }
    let weights = Weights::new(graph, row_standardize);
    let scale = n as f64 / (weights.s0 * m2);
    Ok(Prepared { weights, z, scale })
}

/// Global Moran's I with binary neighbor weights, optionally row-standardized.
pub fn morans_i(values: &[f64], graph: &AdjacencyGraph, row_standardize: bool) -> Result<f64> {
    let prep = prepare(values, graph, row_standardize)?;
    Ok(prep.scale * prep.weights.cross_product(&prep.z))
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Moran's I of each random relabelling; replicate `r` draws from stream `r`
/// of the seeded generator, so the output does not depend on thread count.
pub fn permutation_distribution(
    values: &[f64],
    graph: &AdjacencyGraph,
    n_permutations: usize,
    seed: u64,
    row_standardize: bool,
) -> Result<Vec<f64>> {
    let prep = prepare(values, graph, row_standardize)?;
    Ok((0..n_permutations)
        .into_par_iter()
        .map(|r| {
            let mut z = prep.z.clone();
            z.shuffle(&mut replicate_rng(seed, r));
            prep.scale * prep.weights.cross_product(&z)
        })
        .collect())
}

/// One-sided (upper tail) permutation test.
pub fn moran_permutation_test(
    values: &[f64],
    graph: &AdjacencyGraph,
    n_permutations: usize,
    seed: u64,
    row_standardize: bool,
) -> Result<MoranResult> {
    if n_permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {n_permutations}"
        )));
    }
    let observed = morans_i(values, graph, row_standardize)?;
    let perms = permutation_distribution(values, graph, n_permutations, seed, row_standardize)?;
    let tol = TIE_TOL * observed.abs().max(1.0);
    let extreme = perms.iter().filter(|&&v| v >= observed - tol).count();
    Ok(MoranResult {
        observed_i: observed,
        expected_i: -1.0 / (values.len() as f64 - 1.0),
        p_value: (1 + extreme) as f64 / (n_permutations + 1) as f64,
        n_permutations,
        seed,
        row_standardized: row_standardize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> AdjacencyGraph {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        AdjacencyGraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn alternating_cycle_is_minus_one() {
        let i = morans_i(&[1.0, -1.0, 1.0, -1.0], &cycle(4), true).unwrap();
        assert_eq!(i, -1.0);
    }

    #[test]
    fn constant_is_undefined() {
        assert!(matches!(
            morans_i(&[2.0; 4], &cycle(4), true),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn edgeless_is_undefined() {
        let g = AdjacencyGraph::from_neighbors(vec![vec![]; 3]).unwrap();
        assert!(matches!(
            morans_i(&[1.0, 2.0, 3.0], &g, true),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn too_few_permutations() {
        assert!(moran_permutation_test(&[1.0, 2.0, 3.0, 0.5], &cycle(4), 98, 0, true).is_err());
    }

    #[test]
    fn permutation_invariant_statistic_gives_p_one() {
        // Complete graph: every relabelling has the same I.
        let n = 6;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        let g = AdjacencyGraph::from_edges(n, &edges).unwrap();
        let values = [0.3, 1.7, -2.0, 4.1, 0.0, 0.9];
        let res = moran_permutation_test(&values, &g, 99, 5, true).unwrap();
        assert_eq!(res.p_value, 1.0);
        assert!((res.observed_i - res.expected_i).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let values: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) as f64).sin()).collect();
        let a = moran_permutation_test(&values, &cycle(12), 199, 42, true).unwrap();
        let b = moran_permutation_test(&values, &cycle(12), 199, 42, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_keys() {
        let r = MoranResult {
            observed_i: 0.5,
            expected_i: -0.25,
            p_value: 0.01,
            n_permutations: 99,
            seed: 3,
            row_standardized: true,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"statistic":0.5,"expectation":-0.25,"p_value":0.01,"n_permutations":99,"seed":3,"row_standardized":true}"#
        );
    }
}
