//! Lloyd's K-Means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{euclidean, squared_euclidean, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Converged once no centroid moves by this much or more.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 15,
            seed: 0,
            max_iter: 300,
            tol: 1e-4,
        }
    }
}

/// A fitted partition. Serialises to `{K, seed, centroids, inertia, iterations_run}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations_run: usize,
}

/// Model plus what the fit observed on its training points.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: KMeansModel,
    pub labels: Vec<usize>,
    /// Inertia after every assignment step, final assignment last.
    pub inertia_trace: Vec<f64>,
}

// Fixed chunking keeps the inertia sum independent of the thread count.
const CHUNK: usize = 2048;

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_euclidean(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign_all(centroids: &[Vec<f64>], points: &PointCloud) -> (Vec<usize>, Vec<f64>, f64) {
    let n = points.len();
    let dim = points.dim();
    let parts: Vec<(Vec<usize>, Vec<f64>, f64)> = points
        .coords()
        .par_chunks(CHUNK * dim)
        .map(|chunk| {
            let mut labels = Vec::with_capacity(chunk.len() / dim);
            let mut dists = Vec::with_capacity(chunk.len() / dim);
            let mut sum = 0.0;
            for p in chunk.chunks_exact(dim) {
                let (c, d) = nearest(centroids, p);
                labels.push(c);
                dists.push(d);
                sum += d;
            }
            (labels, dists, sum)
        })
        .collect();
    let mut labels = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    let mut inertia = 0.0;
    for (l, d, s) in parts {
        labels.extend(l);
        dists.extend(d);
        inertia += s;
    }
    (labels, dists, inertia)
}

fn plus_plus_init(points: &PointCloud, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centroids = vec![points.row(first).to_vec()];
    let mut d2: Vec<f64> = points.rows().map(|p| squared_euclidean(p, &centroids[0])).collect();
    let mut chosen = vec![false; n];
    chosen[first] = true;
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // every remaining point coincides with a centroid
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[pick] = true;
        let c = points.row(pick).to_vec();
        for (i, p) in points.rows().enumerate() {
            d2[i] = d2[i].min(squared_euclidean(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

pub fn kmeans_fit(points: &PointCloud, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let n = points.len();
    if cfg.k == 0 {
        return Err(Error::Parameter("K must be positive".into()));
    }
    if n < cfg.k {
        return Err(Error::Parameter(format!("{n} points cannot form {} clusters", cfg.k)));
    }
    if !(cfg.tol >= 0.0) {
        return Err(Error::Parameter("tol must be nonnegative".into()));
    }
    let dim = points.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = plus_plus_init(points, cfg.k, &mut rng);
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let (labels, dists, inertia) = assign_all(&centroids, points);
        trace.push(inertia);
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; cfg.k];
        let mut counts = vec![0usize; cfg.k];
        for (p, &c) in points.rows().zip(&labels) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut taken = vec![false; n];
        let mut shift: f64 = 0.0;
        for c in 0..cfg.k {
            let next = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                // empty cluster: reseed at the point farthest from its own centroid
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("N >= K");
                taken[far] = true;
                points.row(far).to_vec()
            };
            shift = shift.max(euclidean(&next, &centroids[c]));
            centroids[c] = next;
        }
        if shift < cfg.tol {
            break;
        }
    }

    let (labels, _, inertia) = assign_all(&centroids, points);
    trace.push(inertia);
    Ok(KMeansFit {
        model: KMeansModel {
            k: cfg.k,
            seed: cfg.seed,
            centroids,
            inertia,
            iterations_run: iterations,
        },
        labels,
        inertia_trace: trace,
    })
}

/// Runs `restarts` fits with seeds `seed, seed+1, ...` and keeps the lowest inertia.
pub fn kmeans_fit_best(points: &PointCloud, cfg: &KMeansConfig, restarts: usize) -> Result<KMeansFit> {
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) {
        let fit = kmeans_fit(
            points,
            &KMeansConfig {
                seed: cfg.seed.wrapping_add(r as u64),
                ..*cfg
            },
        )?;
        if best.as_ref().is_none_or(|b| fit.model.inertia < b.model.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Nearest centroid per point; ties go to the lowest region id.
pub fn kmeans_assign(model: &KMeansModel, points: &PointCloud) -> Result<Vec<usize>> {
    let dim = model.centroids.first().map_or(0, Vec::len);
    if points.dim() != dim {
        return Err(Error::Parameter(format!(
            "points have dimension {}, centroids have {dim}",
            points.dim()
        )));
    }
    Ok(assign_all(&model.centroids, points).0)
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&m| pairs(m)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / pairs(n as u64);
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
