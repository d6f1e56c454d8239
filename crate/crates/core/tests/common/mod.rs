//! Fixtures and brute-force oracles shared by the integration tests and the
//! acceptance harness.

#![allow(dead_code)]

use std::path::PathBuf;

use lfshield::defense::{FeatureMatrix, OutputLayerGradients};
use lfshield::nn::{forward, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// ---------------------------------------------------------------- gradients

/// Mean cross-entropy of `params` on labelled examples.
pub fn loss(params: &ModelParams, examples: &[(Vec<f64>, usize)]) -> f64 {
    let total: f64 = examples
        .iter()
        .map(|(x, y)| label_loss_public(&forward(params, x).unwrap().probs, *y))
        .sum();
    total / examples.len() as f64
}

fn label_loss_public(probs: &[f64], y: usize) -> f64 {
    -probs[y].max(1e-12).ln()
}

/// Central finite-difference gradient of the mean loss.
pub fn numeric_gradient(params: &ModelParams, examples: &[(Vec<f64>, usize)], h: f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.as_slice().len())
        .map(|i| {
            let orig = p.as_slice()[i];
            p.as_mut_slice()[i] = orig + h;
            let up = loss(&p, examples);
            p.as_mut_slice()[i] = orig - h;
            let down = loss(&p, examples);
            p.as_mut_slice()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error that falls back to absolute error near zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

// ------------------------------------------------------------------ oracles

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Middle element(s) of a sorted copy.
pub fn median_oracle(v: &[f64]) -> f64 {
    let s = sorted(v);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Repeated median from the full pairwise-slope table.
pub fn repeated_median_oracle(v: &[f64]) -> f64 {
    let ys = sorted(v);
    let m = ys.len();
    if m == 1 {
        return ys[0];
    }
    let x = |i: usize| (i + 1) as f64;
    let table: Vec<Vec<f64>> =
        (0..m).map(|i| (0..m).map(|j| if i == j { f64::NAN } else { (ys[j] - ys[i]) / (x(j) - x(i)) }).collect()).collect();
    let per_point: Vec<f64> = table
        .iter()
        .map(|row| median_oracle(&row.iter().copied().filter(|s| !s.is_nan()).collect::<Vec<_>>()))
        .collect();
    let slope = median_oracle(&per_point);
    let intercept = median_oracle(&(0..m).map(|i| ys[i] - slope * x(i)).collect::<Vec<_>>());
    intercept + slope * (m as f64 + 1.0) / 2.0
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Multi-Krum by exhaustive search: each score minimises over every
/// neighbour subset, and the kept set minimises the summed score over every
/// `(m - f)`-subset, ties going to the lexicographically first subset.
pub fn multi_krum_oracle(updates: &[Vec<f64>], f: usize) -> Vec<usize> {
    let m = updates.len();
    let scores: Vec<f64> = (0..m)
        .map(|i| {
            let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
            subsets(others.len(), m - f - 2)
                .iter()
                .map(|s| s.iter().map(|&t| sq_dist(&updates[i], &updates[others[t]])).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // Subsets come in lexicographic order, so keeping the first of (nearly)
    // equal sums prefers lower indices.
    let mut best: Option<(f64, Vec<usize>)> = None;
    for s in subsets(m, m - f) {
        let total: f64 = s.iter().map(|&i| scores[i]).sum();
        if best.as_ref().is_none_or(|(b, _)| total < b - 1e-12 * b.abs()) {
            best = Some((total, s));
        }
    }
    best.unwrap().1
}

/// Mutual-reachability weights with the point itself as the first neighbour.
pub fn mutual_reachability(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| sq_dist(&rows[i], &rows[j]).sqrt()).collect()).collect();
    let core: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| d[i][j]).fold(f64::INFINITY, f64::min))
        .collect();
    (0..n).map(|i| (0..n).map(|j| d[i][j].max(core[i]).max(core[j])).collect()).collect()
}

/// Edges of the labelled tree encoded by a Prüfer sequence.
pub fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    seq.iter().for_each(|&v| degree[v] += 1);
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).unwrap();
        edges.push((leaf, v));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Sorted edge weights of the lightest spanning tree, found by enumerating
/// all `n^(n-2)` labelled trees.
pub fn exhaustive_mst_weights(w: &[Vec<f64>]) -> Vec<f64> {
    let n = w.len();
    if n == 2 {
        return vec![w[0][1]];
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let weights: Vec<f64> = prufer_edges(&seq, n).iter().map(|&(a, b)| w[a][b]).collect();
        let total: f64 = sorted(&weights).iter().sum();
        if total < best.0 {
            best = (total, weights);
        }
        let mut i = 0;
        while i < len && seq[i] == n - 1 {
            seq[i] = 0;
            i += 1;
        }
        if i == len {
            break;
        }
        seq[i] += 1;
    }
    sorted(&best.1)
}

// ----------------------------------------------------------------- fixtures

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn gaussian_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| lfshield::rng::standard_normal(rng)).collect()
}

/// A unit vector at an angle drawn uniformly from `[0, max_deg]` away from
/// `center` (a unit vector), in a uniformly random orthogonal direction.
pub fn jitter(rng: &mut impl Rng, center: &[f64], max_deg: f64) -> Vec<f64> {
    let mut w = gaussian_vec(rng, center.len());
    let dot: f64 = w.iter().zip(center).map(|(a, b)| a * b).sum();
    w.iter_mut().zip(center).for_each(|(a, b)| *a -= dot * b);
    let w = unit(w);
    let theta = rng.gen_range(0.0..=max_deg).to_radians();
    center.iter().zip(&w).map(|(c, o)| theta.cos() * c + theta.sin() * o).collect()
}

pub struct PlantedMild {
    pub features: FeatureMatrix,
    pub attackers: Vec<usize>,
}

/// Honest rows within `honest_deg` of a random direction `u`, attacker rows
/// within `attacker_deg` of `-u`; norms vary in `[0.8, 1.2]`.
pub fn planted_mild(
    seed: u64,
    peers: usize,
    fraction: f64,
    dim: usize,
    honest_deg: f64,
    attacker_deg: f64,
) -> PlantedMild {
    let mut r = rng(seed);
    let u = unit(gaussian_vec(&mut r, dim));
    let neg_u: Vec<f64> = u.iter().map(|x| -x).collect();
    let n_att = (fraction * peers as f64).round() as usize;
    let mut ids: Vec<usize> = (0..peers).collect();
    rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut r);
    let mut attackers: Vec<usize> = ids[..n_att].to_vec();
    attackers.sort_unstable();
    let rows = (0..peers)
        .map(|k| {
            let (c, deg) = if attackers.contains(&k) { (&neg_u, attacker_deg) } else { (&u, honest_deg) };
            let scale = r.gen_range(0.8..=1.2);
            jitter(&mut r, c, deg).into_iter().map(|x| x * scale).collect()
        })
        .collect();
    PlantedMild { features: FeatureMatrix { rows, neurons: vec![(7, 1); peers] }, attackers }
}

pub const ACTIVATION_JITTER: f64 = 0.10;
pub const DELTA_JITTER: f64 = 0.05;

pub struct PlantedExtreme {
    pub gradients: OutputLayerGradients,
    pub attackers: Vec<usize>,
    pub singleton: Option<usize>,
}

/// Output-layer gradients shaped like single-class peers.
///
/// A peer holding class `c` pulls neuron `c` up (`-a * h_c`) and pushes its
/// most-confused class down (`+b * h_c`), where `h_c` is a class-specific
/// non-negative hidden activation. Attackers hold `source` examples labelled
/// `target`: they pull `target` up and push `source` down, both strongly. An
/// optional singleton has its own unrelated activation pattern.
///
/// Each peer perturbs its activation coordinates by up to
/// [`ACTIVATION_JITTER`] and its output errors by up to [`DELTA_JITTER`]
/// (relative). When the one-dimensional error spread dominates the
/// activation spread, HDBSCAN with clusters of two splits classes into
/// pieces and honest pieces get flagged.
pub fn planted_extreme(
    seed: u64,
    classes: usize,
    per_class: usize,
    n_attackers: usize,
    source: usize,
    target: usize,
    with_singleton: bool,
) -> PlantedExtreme {
    const HIDDEN: usize = 32;
    let mut r = rng(seed);
    let proto: Vec<Vec<f64>> =
        (0..classes).map(|_| (0..HIDDEN).map(|_| r.gen_range(0.0..1.0f64).powi(2) * 2.0).collect()).collect();
    let confused: Vec<usize> = (0..classes).map(|c| (c + 1 + r.gen_range(0..classes - 1)) % classes).collect();
    let block = HIDDEN + 1;
    // Each neuron block is `delta_j * [h, 1]`: the rank-one shape of a
    // single-class peer's gradient. Classes the peer does not hold get a
    // small positive delta.
    let peer = |r: &mut ChaCha8Rng, h: &[f64], up: (usize, f64), down: (usize, f64)| {
        let act: Vec<f64> = h.iter().map(|v| v * r.gen_range(1.0 - ACTIVATION_JITTER..1.0 + ACTIVATION_JITTER)).chain([1.0]).collect();
        let mut row = Vec::with_capacity(classes * block);
        for j in 0..classes {
            let delta = if j == up.0 {
                -up.1
            } else if j == down.0 {
                down.1
            } else {
                r.gen_range(0.0..0.02)
            };
            row.extend(act.iter().map(|a| delta * a));
        }
        row
    };
    let mut rows = Vec::new();
    let mut attackers = Vec::new();
    for c in 0..classes {
        for i in 0..per_class {
            let attacker = c == source && i < n_attackers;
            let row = if attacker {
                attackers.push(rows.len());
                let s = 0.85 * r.gen_range(1.0 - DELTA_JITTER..1.0 + DELTA_JITTER);
                let d = s * 0.95 * r.gen_range(1.0 - DELTA_JITTER..1.0 + DELTA_JITTER);
                peer(&mut r, &proto[source], (target, s), (source, d))
            } else {
                let a = 0.4 * r.gen_range(1.0 - DELTA_JITTER..1.0 + DELTA_JITTER);
                let b = a * 0.35 * r.gen_range(1.0 - DELTA_JITTER..1.0 + DELTA_JITTER);
                peer(&mut r, &proto[c], (c, a), (confused[c], b))
            };
            rows.push(row);
        }
    }
    let singleton = with_singleton.then(|| {
        let h: Vec<f64> = (0..HIDDEN).map(|_| r.gen_range(0.0..3.0)).collect();
        let up = r.gen_range(0..classes);
        let down = (up + 1 + r.gen_range(0..classes - 1)) % classes;
        let row = peer(&mut r, &h, (up, 0.9), (down, 0.6));
        rows.push(row);
        rows.len() - 1
    });
    // Interleave so that ids do not reveal classes.
    let n = rows.len();
    let mut perm: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
    let mut placed = vec![Vec::new(); n];
    let mut new_id = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        new_id[old] = new;
    }
    for (old, row) in rows.into_iter().enumerate() {
        placed[new_id[old]] = row;
    }
    let mut attackers: Vec<usize> = attackers.into_iter().map(|a| new_id[a]).collect();
    attackers.sort_unstable();
    PlantedExtreme {
        gradients: OutputLayerGradients::from_rows(HIDDEN, classes, placed).unwrap(),
        attackers,
        singleton: singleton.map(|s| new_id[s]),
    }
}

