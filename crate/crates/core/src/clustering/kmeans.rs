//! Lloyd's k-means with k-means++ seeding and restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_rows, squared_euclidean, ClusterAssignment};
use crate::error::{Error, Result};

pub const RESTARTS: usize = 10;
pub const MAX_ITERS: usize = 100;
pub const REL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub assignment: ClusterAssignment,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Final inertia of every restart, in order.
    pub restart_inertias: Vec<f64>,
    /// Number of empty-cluster repairs performed by the kept restart.
    pub repairs: usize,
}

/// Clusters `rows` into `k` groups. The lowest-inertia restart is kept; ties
/// keep the earlier restart.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::contract("k-means needs k >= 1"));
    }
    if rows.len() < k {
        return Err(Error::contract(format!("k-means needs at least {k} rows, got {}", rows.len())));
    }
    check_rows(rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Lloyd> = None;
    let mut inertias = Vec::with_capacity(RESTARTS);
    for _ in 0..RESTARTS {
        let run = lloyd(rows, plus_plus(rows, k, &mut rng));
        inertias.push(run.inertia);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let labels = best.labels.iter().map(|&l| l as i64).collect();
    Ok(KMeans {
        assignment: ClusterAssignment::from_labels(labels, k)?,
        centroids: best.centroids,
        inertia: best.inertia,
        restart_inertias: inertias,
        repairs: best.repairs,
    })
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![rows[rng.gen_range(0..rows.len())].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| squared_euclidean(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = rows.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..rows.len())
        };
        centroids.push(rows[pick].clone());
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(squared_euclidean(r, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

struct Lloyd {
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    repairs: usize,
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_euclidean(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Lloyd {
    let k = centroids.len();
    let dim = rows[0].len();
    let mut labels = vec![0; rows.len()];
    let mut prev = f64::INFINITY;
    let mut inertia = f64::INFINITY;
    let mut repairs = 0;
    for _ in 0..MAX_ITERS {
        for (l, r) in labels.iter_mut().zip(rows) {
            *l = nearest(r, &centroids).0;
        }
        repairs += repair_empty(rows, &mut labels, &centroids, k);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(r).for_each(|(s, v)| *s += v);
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
        inertia = rows.iter().zip(&labels).map(|(r, &l)| squared_euclidean(r, &centroids[l])).sum();
        if inertia == 0.0 || (prev - inertia).abs() <= REL_TOL * prev {
            break;
        }
        prev = inertia;
    }
    Lloyd { labels, centroids, inertia, repairs }
}

/// Moves, for each empty cluster, the point farthest from its centroid (taken
/// from a cluster with more than one member) into the empty cluster.
fn repair_empty(rows: &[Vec<f64>], labels: &mut [usize], centroids: &[Vec<f64>], k: usize) -> usize {
    let mut repairs = 0;
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repairs;
        };
        let mut far: Option<(usize, f64)> = None;
        for (i, r) in rows.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = squared_euclidean(r, &centroids[labels[i]]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        match far {
            Some((i, _)) => {
                labels[i] = empty;
                repairs += 1;
            }
            None => return repairs,
        }
    }
}
