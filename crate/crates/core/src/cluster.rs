//! K-means over per-region coefficient vectors, silhouette scoring and
//! label agreement between two clusterings.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clustering features, one row per region.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    rows: Vec<Vec<f64>>,
    /// `(mean, std)` per column when the table was z-scored.
    pub standardization: Option<Vec<(f64, f64)>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = names.len();
        if m == 0 {
            return Err(Error::InvalidArgument(
                "feature table needs at least one column".into(),
            ));
        }
        for row in &rows {
            if row.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    actual: row.len(),
                    context: "feature row width",
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "feature table has non-finite entries".into(),
                ));
            }
        }
        Ok(FeatureTable {
            names,
            rows,
            standardization: None,
        })
    }

    /// One-dimensional table from a slice of values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(vec!["x".into()], values.iter().map(|&v| vec![v]).collect())
    }

    /// Selects columns from coefficient rows (e.g. GWR beta), optionally
    /// skipping column 0 (the intercept).
    pub fn from_coefficients(
        names: &[String],
        beta: &[Vec<f64>],
        include_intercept: bool,
    ) -> Result<Self> {
        let start = usize::from(!include_intercept);
        if start >= names.len() {
            return Err(Error::InvalidArgument(
                "no coefficient columns left once the intercept is excluded".into(),
            ));
        }
        Self::new(
            names[start..].iter().map(|n| format!("beta_{n}")).collect(),
            beta.iter().map(|row| row[start..].to_vec()).collect(),
        )
    }

    /// Z-scores every column; zero-variance columns are centred only.
    pub fn standardized(&self) -> FeatureTable {
        let n = self.rows.len().max(1) as f64;
        let stats: Vec<(f64, f64)> = (0..self.m())
            .map(|j| {
                let mean = self.rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = self.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            })
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&stats)
                    .map(|(v, &(mu, sd))| if sd > 0.0 { (v - mu) / sd } else { v - mu })
                    .collect()
            })
            .collect();
        FeatureTable {
            names: self.names.clone(),
            rows,
            standardization: Some(stats),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    /// k-means++ (D² sampling).
    #[default]
    #[serde(alias = "kmeans++")]
    PlusPlus,
    /// K distinct data points chosen uniformly.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub seed: u64,
    pub n_restarts: usize,
    pub max_iter: usize,
    pub init: KMeansInit,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            seed: 0,
            n_restarts: 20,
            max_iter: 300,
            init: KMeansInit::PlusPlus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `None` when `k < 2`.
    pub silhouette_mean: Option<f64>,
    pub silhouette_per_point: Option<Vec<f64>>,
    /// WSS after every assign/update cycle of the winning restart.
    pub wss_trace: Vec<f64>,
}

/// One Lloyd run from given starting centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wss_trace: Vec<f64>,
}

/// Total within-cluster sum of squares.
pub fn within_cluster_ss(features: &FeatureTable, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    features
        .rows()
        .iter()
        .zip(labels)
        .map(|(x, &l)| sq_dist(x, &centroids[l]))
        .sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(x, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn update_centroids(
    features: &FeatureTable,
    labels: &[usize],
    k: usize,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let m = features.m();
    let mut sums = vec![vec![0.0; m]; k];
    let mut counts = vec![0usize; k];
    for (x, &l) in features.rows().iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            for v in s.iter_mut() {
                *v /= c as f64;
            }
        }
    }
    (sums, counts)
}

/// Moves the point farthest from its centroid (taken from a cluster with
/// more than one member) into each empty cluster.
fn repair_empty(
    features: &FeatureTable,
    labels: &mut [usize],
    centroids: &mut Vec<Vec<f64>>,
    counts: &mut Vec<usize>,
) {
    let k = centroids.len();
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let candidate = (0..features.n())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| (i, sq_dist(features.row(i), &centroids[labels[i]])))
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = candidate else { break };
        labels[i] = empty;
        let (c, n) = update_centroids(features, labels, k);
        *centroids = c;
        *counts = n;
    }
}

/// Lloyd iterations: assign to the nearest centroid (lowest index on ties),
/// recompute means, stop when assignments no longer change.
pub fn lloyd(features: &FeatureTable, initial: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let k = initial.len();
    let mut centroids = initial;
    let mut labels = vec![usize::MAX; features.n()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let new: Vec<usize> = features
            .rows()
            .iter()
            .map(|x| nearest(x, &centroids))
            .collect();
        if new == labels {
            converged = true;
            break;
        }
        labels = new;
        let (c, mut counts) = update_centroids(features, &labels, k);
        centroids = c;
        repair_empty(features, &mut labels, &mut centroids, &mut counts);
        trace.push(within_cluster_ss(features, &labels, &centroids));
    }
    if !converged {
        // Converged if one more assignment pass would change nothing.
        converged = features
            .rows()
            .iter()
            .map(|x| nearest(x, &centroids))
            .eq(labels.iter().copied());
    }
    let wss = within_cluster_ss(features, &labels, &centroids);
    LloydRun {
        labels,
        centroids,
        wss,
        iterations,
        converged,
        wss_trace: trace,
    }
}

fn init_centroids(
    features: &FeatureTable,
    k: usize,
    init: KMeansInit,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = features.n();
    match init {
        KMeansInit::Random => rand::seq::index::sample(rng, n, k)
            .into_iter()
            .map(|i| features.row(i).to_vec())
            .collect(),
        KMeansInit::PlusPlus => {
            let mut chosen = vec![features.row(rng.random_range(0..n)).to_vec()];
            let mut d2: Vec<f64> = features
                .rows()
                .iter()
                .map(|x| sq_dist(x, &chosen[0]))
                .collect();
            while chosen.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut target = rng.random::<f64>() * total;
                    let mut pick = n - 1;
                    for (i, &d) in d2.iter().enumerate() {
                        if target < d {
                            pick = i;
                            break;
                        }
                        target -= d;
                    }
                    pick
                } else {
                    rng.random_range(0..n)
                };
                let c = features.row(next).to_vec();
                for (d, x) in d2.iter_mut().zip(features.rows()) {
                    *d = d.min(sq_dist(x, &c));
                }
                chosen.push(c);
            }
            chosen
        }
    }
}

/// Best of `n_restarts` seeded Lloyd runs (smallest WSS, earliest restart
/// on ties). Restart `r` uses stream `r` of the seeded generator.
pub fn kmeans(features: &FeatureTable, k: usize, options: &KMeansOptions) -> Result<ClusterResult> {
    let n = features.n();
    if k == 0 {
        return Err(Error::InvalidK("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InfeasibleK { k, n });
    }
    if options.max_iter == 0 || options.n_restarts == 0 {
        return Err(Error::InvalidArgument(
            "max_iter and n_restarts must be at least 1".into(),
        ));
    }
    let runs: Vec<LloydRun> = (0..options.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(r as u64);
            let init = init_centroids(features, k, options.init, &mut rng);
            lloyd(features, init, options.max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.wss < a.wss { b } else { a })
        .expect("at least one restart");

    let (silhouette_mean, silhouette_per_point) = if k >= 2 {
        let (mean, per) = silhouette(features, &best.labels)?;
        (Some(mean), Some(per))
    } else {
        (None, None)
    };
    Ok(ClusterResult {
        k,
        labels: best.labels,
        centroids: best.centroids,
        wss: best.wss,
        iterations: best.iterations,
        converged: best.converged,
        silhouette_mean,
        silhouette_per_point,
        wss_trace: best.wss_trace,
    })
}

/// Mean and per-point silhouette; singleton clusters score 0, as do
/// points with `max(a, b) = 0`.
pub fn silhouette(features: &FeatureTable, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    let n = features.n();
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: labels.len(),
            context: "labels vs feature rows",
        });
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let used = sizes.iter().filter(|&&s| s > 0).count();
    if used < 2 {
        return Err(Error::UndefinedStatistic(
            "silhouette needs at least 2 clusters".into(),
        ));
    }
    let per: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += dist(features.row(i), features.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    let mean = per.iter().sum::<f64>() / n as f64;
    Ok((mean, per))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSelection {
    pub k_best: usize,
    /// `(k, mean silhouette)` for every k tried.
    pub silhouettes: Vec<(usize, f64)>,
    pub best: ClusterResult,
}

/// Runs K-means for each `k` in `[k_min, k_max]` and keeps the one with the
/// highest mean silhouette (smaller `k` on ties).
pub fn select_k(
    features: &FeatureTable,
    k_min: usize,
    k_max: usize,
    options: &KMeansOptions,
) -> Result<KSelection> {
    let n = features.n();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(Error::InvalidK(format!(
            "k range [{k_min}, {k_max}] must satisfy 2 <= k_min <= k_max <= n - 1 = {}",
            n.saturating_sub(1)
        )));
    }
    let mut silhouettes = Vec::new();
    let mut best: Option<ClusterResult> = None;
    for k in k_min..=k_max {
        let res = kmeans(features, k, options)?;
        let s = res.silhouette_mean.expect("k >= 2");
        silhouettes.push((k, s));
        if best
            .as_ref()
            .is_none_or(|b| s > b.silhouette_mean.expect("k >= 2"))
        {
            best = Some(res);
        }
    }
    let best = best.expect("nonempty k range");
    Ok(KSelection {
        k_best: best.k,
        silhouettes,
        best,
    })
}

fn dense_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len())
        .rev()
        .find(|&j| p[j] > p[i - 1])
        .expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Largest fraction of matching labels over all one-to-one relabellings.
pub fn agreement_accuracy(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::Dimension {
            expected: labels_a.len(),
            actual: labels_b.len(),
            context: "agreement labelings",
        });
    }
    if labels_a.is_empty() {
        return Err(Error::InvalidArgument(
            "agreement of empty labelings".into(),
        ));
    }
    let (a, ka) = dense_labels(labels_a);
    let (b, kb) = dense_labels(labels_b);
    let k = ka.max(kb);
    if k > 8 {
        return Err(Error::SearchBound(k));
    }
    let mut table = vec![vec![0usize; k]; k];
    for (&x, &y) in a.iter().zip(&b) {
        table[x][y] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    loop {
        let matched: usize = (0..k).map(|c| table[c][perm[c]]).sum();
        best = best.max(matched);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best as f64 / labels_a.len() as f64)
}
