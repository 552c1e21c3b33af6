//! Deterministic k-means (k-means++ seeding, Lloyd iterations).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum KMeansError {
    #[error("cannot cluster an empty matrix")]
    Empty,
    #[error("k = {k} exceeds the number of rows ({rows})")]
    TooManyClusters { k: usize, rows: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    SquaredEuclidean,
    /// Rows are L2-normalized first, then clustered with squared Euclidean distance.
    Cosine,
}

pub const DEFAULT_K: usize = 1000;
pub const DEFAULT_MAX_ITERS: usize = 100;

/// `requested` clamped to `⌈rows / 10⌉` (and at least 1) so small pools still cluster.
pub fn effective_k(requested: usize, rows: usize) -> usize {
    requested.min(rows.div_ceil(10)).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index per matrix row.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step, in iteration order.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Row indices of each cluster, in row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (row, &c) in self.assignments.iter().enumerate() {
            out[c].push(row);
        }
        out
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn inertia(rows: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(r, &c)| sq_dist(r, &centroids[c]))
        .sum()
}

fn plus_plus_init(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![rows[first].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`; fall back to the last positive weight.
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| d2[i] > 0.0).expect("positive weight exists"))
        } else {
            // Every remaining point duplicates a centroid.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[pick]));
        }
        centroids.push(rows[pick].clone());
    }
    centroids
}

/// Moves the point farthest from its centroid (taken from a cluster with at
/// least two members) into each empty cluster and recentres that cluster on it.
fn repair_empty(rows: &[Vec<f64>], assignments: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &c in assignments.iter() {
        sizes[c] += 1;
    }
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in rows.iter().enumerate() {
            let c = assignments[i];
            if sizes[c] < 2 {
                continue;
            }
            let d = sq_dist(r, &centroids[c]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("k <= rows leaves a cluster with two members");
        sizes[assignments[i]] -= 1;
        assignments[i] = j;
        sizes[j] = 1;
        centroids[j] = rows[i].clone();
    }
}

fn means(rows: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    // Row order is fixed, so the per-cluster summation order is too.
    for (r, &c) in rows.iter().zip(assignments) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(r) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|x| *x /= n as f64);
        }
    }
    sums
}

pub fn kmeans(matrix: &EmbeddingMatrix, k: usize, seed: u64, max_iters: usize) -> Result<Clustering, KMeansError> {
    kmeans_rows(&matrix.rows, k, seed, max_iters, Distance::SquaredEuclidean)
}

pub fn kmeans_rows(
    rows: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    distance: Distance,
) -> Result<Clustering, KMeansError> {
    if rows.is_empty() {
        return Err(KMeansError::Empty);
    }
    if k == 0 || max_iters == 0 {
        return Err(KMeansError::InvalidParameter("k and max_iters must be at least 1".into()));
    }
    if k > rows.len() {
        return Err(KMeansError::TooManyClusters { k, rows: rows.len() });
    }
    let normalized;
    let rows: &[Vec<f64>] = match distance {
        Distance::SquaredEuclidean => rows,
        Distance::Cosine => {
            normalized = rows
                .iter()
                .map(|r| {
                    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n > 0.0 {
                        r.iter().map(|x| x / n).collect()
                    } else {
                        r.clone()
                    }
                })
                .collect::<Vec<Vec<f64>>>();
            &normalized
        }
    };
    let dim = rows[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(rows, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut next: Vec<usize> = rows.par_iter().map(|r| nearest(r, &centroids).0).collect();
        repair_empty(rows, &mut next, &mut centroids);
        history.push(inertia(rows, &next, &centroids));
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        centroids = means(rows, &assignments, k, dim);
    }
    let inertia = inertia(rows, &assignments, &centroids);
    Ok(Clustering {
        assignments,
        centroids,
        inertia,
        inertia_history: history,
        iterations,
        converged,
    })
}
