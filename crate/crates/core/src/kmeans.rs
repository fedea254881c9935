//! Seeded k-means (k-means++ initialization, Lloyd iterations).
//!
//! Users and items are clustered separately on their learned
//! representations; cluster counts are fractions of the set sizes. Empty
//! clusters are repaired each iteration by reseeding them to the point
//! currently farthest from its assigned centroid, so every cluster is
//! non-empty on return.

use crate::error::{Error, Result};
use crate::mat::Dense;
use crate::par;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    User,
    Item,
}

impl EntityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Item => "item",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub kind: EntityKind,
    pub k: usize,
    /// Point index → cluster id in [0, k).
    pub assignment: Vec<usize>,
    pub centroids: Dense,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centroid uniform, then each next centroid
/// drawn with probability proportional to squared distance from the
/// nearest chosen one. Degenerate all-zero distances fall back to a
/// uniform draw.
fn seed_centroids(points: &Dense, k: usize, rng: &mut Stream) -> Dense {
    let n = points.rows();
    let dim = points.cols();
    let mut centroids = Dense::zeros(k, dim);
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|p| sq_dist(points.row(p), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.f64() * total;
            let mut chosen = n - 1;
            for (p, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = p;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (p, d) in d2.iter_mut().enumerate() {
            let nd = sq_dist(points.row(p), centroids.row(c));
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

/// Nearest centroid per point; ties go to the lowest cluster id.
fn assign(points: &Dense, centroids: &Dense) -> Vec<usize> {
    let k = centroids.rows();
    par::map_range(points.rows(), |p| {
        let row = points.row(p);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = sq_dist(row, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    })
}

pub fn kmeans(
    points: &Dense,
    k: usize,
    kind: EntityKind,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    let n = points.rows();
    let dim = points.cols();
    if k == 0 {
        return Err(Error::data("kmeans: k must be at least 1"));
    }
    if k > n {
        return Err(Error::data(format!("kmeans: k = {k} exceeds {n} points")));
    }
    if !points.is_finite() {
        return Err(Error::numeric("kmeans: non-finite point coordinates"));
    }

    let mut rng = Stream::new(seed, &format!("kmeans_{}", kind.as_str()));
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignment = vec![0usize; n];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        assignment = assign(points, &centroids);

        let mut sums = Dense::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (p, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(p)) {
                *s += x;
            }
        }
        let mut new_centroids = Dense::zeros(k, dim);
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (o, &s) in new_centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *o = s * inv;
                }
            }
        }

        // Reseed empty clusters from the points that fit worst, one per
        // empty cluster, lowest point index on ties.
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut dist: Vec<f64> = (0..n)
                .map(|p| sq_dist(points.row(p), new_centroids.row(assignment[p])))
                .collect();
            for c in empties {
                let (far, _) =
                    dist.iter()
                        .enumerate()
                        .fold((0usize, f64::NEG_INFINITY), |acc, (p, &d)| {
                            if d > acc.1 {
                                (p, d)
                            } else {
                                acc
                            }
                        });
                new_centroids.row_mut(c).copy_from_slice(points.row(far));
                assignment[far] = c;
                dist[far] = f64::NEG_INFINITY;
            }
        }

        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), new_centroids.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = new_centroids;
        if shift < tol {
            break;
        }
    }

    debug_assert!(assignment.iter().all(|&c| c < k));
    Ok(ClusterAssignment {
        kind,
        k,
        assignment,
        centroids,
        iterations,
    })
}

/// Cluster count from a fraction of the set size: round(β·n) clamped to
/// [1, n].
pub fn cluster_count(beta: f64, n: usize) -> usize {
    ((beta * n as f64).round() as usize).clamp(1, n.max(1))
}
