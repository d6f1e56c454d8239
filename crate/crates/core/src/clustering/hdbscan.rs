//! HDBSCAN over Euclidean rows.
//!
//! Pipeline: core distances, mutual-reachability minimum spanning tree
//! (Prim, dense), single-linkage hierarchy, condensed tree for a minimum
//! cluster size, excess-of-mass selection with `lambda = 1 / distance`.
//! Equal stabilities prefer the children. The root is only eligible when it
//! never splits into two clusters.

use super::{check_rows, euclidean, ClusterAssignment, OUTLIER};
use crate::error::{Error, Result};

/// Neighbour rank used for core distances; the point itself counts as the first.
pub const HDBSCAN_MIN_SAMPLES: usize = 2;

/// Distances are floored here so that `1 / d` stays finite for duplicates.
const MIN_DISTANCE: f64 = 1e-12;

fn distance_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&rows[i], &rows[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

fn core_distances(dist: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    dist.iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            sorted[min_samples.min(sorted.len()) - 1]
        })
        .collect()
}

/// Minimum spanning tree of the mutual-reachability graph as `(a, b, weight)`
/// edges in the order Prim's algorithm adds them (starting from row 0).
pub fn mutual_reachability_mst(rows: &[Vec<f64>], min_samples: usize) -> Result<Vec<(usize, usize, f64)>> {
    if min_samples == 0 {
        return Err(Error::contract("min_samples must be at least 1"));
    }
    check_rows(rows)?;
    let n = rows.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dist = distance_matrix(rows);
    let core = core_distances(&dist, min_samples);
    let reach = |a: usize, b: usize| dist[a][b].max(core[a]).max(core[b]);

    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = reach(current, v);
            if w < best[v].0 {
                best[v] = (w, current);
            }
            if next.is_none_or(|u: usize| best[v].0 < best[u].0) {
                next = Some(v);
            }
        }
        let v = next.expect("a vertex remains outside the tree");
        edges.push((best[v].1, v, best[v].0));
        in_tree[v] = true;
        current = v;
    }
    Ok(edges)
}

struct Merge {
    left: usize,
    right: usize,
    dist: f64,
    size: usize,
}

/// Single-linkage merges; node `n + i` is the i-th merge.
fn single_linkage(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Vec<Merge> {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.min(a.1).cmp(&b.0.min(b.1))));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (a, b, w) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let node = n + merges.len();
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        merges.push(Merge { left: ra, right: rb, dist: w, size: size[node] });
    }
    merges
}

struct Cluster {
    parent: Option<usize>,
    birth: f64,
    children: Vec<usize>,
    /// `(point, lambda)` for points leaving this cluster directly.
    departures: Vec<(usize, f64)>,
}

fn leaves(n: usize, merges: &[Merge], node: usize, out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = &merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
}

fn node_size(n: usize, merges: &[Merge], node: usize) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].size
    }
}

fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<Cluster> {
    let mut clusters = vec![Cluster { parent: None, birth: 0.0, children: Vec::new(), departures: Vec::new() }];
    let root = n + merges.len() - 1;
    let mut stack = vec![(root, 0usize)];
    let mut buf = Vec::new();
    while let Some((node, cid)) = stack.pop() {
        if node < n {
            // Only reachable for a lone point, which cannot form a cluster.
            let birth = clusters[cid].birth;
            clusters[cid].departures.push((node, birth));
            continue;
        }
        let m = &merges[node - n];
        let lambda = 1.0 / m.dist.max(MIN_DISTANCE);
        let (ls, rs) = (node_size(n, merges, m.left), node_size(n, merges, m.right));
        let big_left = ls >= min_cluster_size;
        let big_right = rs >= min_cluster_size;
        if big_left && big_right {
            for child in [m.left, m.right] {
                let id = clusters.len();
                clusters.push(Cluster { parent: Some(cid), birth: lambda, children: Vec::new(), departures: Vec::new() });
                clusters[cid].children.push(id);
                stack.push((child, id));
            }
        } else {
            for (child, big) in [(m.left, big_left), (m.right, big_right)] {
                if big {
                    stack.push((child, cid));
                } else {
                    buf.clear();
                    leaves(n, merges, child, &mut buf);
                    clusters[cid].departures.extend(buf.iter().map(|&p| (p, lambda)));
                }
            }
        }
    }
    clusters
}

fn stability(clusters: &[Cluster], c: usize) -> f64 {
    let cl = &clusters[c];
    let own: f64 = cl.departures.iter().map(|&(_, l)| l - cl.birth).sum();
    let inherited: f64 = cl
        .children
        .iter()
        .map(|&d| (clusters[d].birth - cl.birth) * subtree_points(clusters, d) as f64)
        .sum();
    own + inherited
}

fn subtree_points(clusters: &[Cluster], c: usize) -> usize {
    clusters[c].departures.len() + clusters[c].children.iter().map(|&d| subtree_points(clusters, d)).sum::<usize>()
}

fn select_eom(clusters: &[Cluster]) -> Vec<bool> {
    let k = clusters.len();
    let mut selected = vec![false; k];
    if k == 1 {
        selected[0] = true;
        return selected;
    }
    let mut best = vec![0.0; k];
    for c in (1..k).rev() {
        let own = stability(clusters, c);
        if clusters[c].children.is_empty() {
            selected[c] = true;
            best[c] = own;
            continue;
        }
        let children: f64 = clusters[c].children.iter().map(|&d| best[d]).sum();
        if children >= own {
            best[c] = children;
        } else {
            best[c] = own;
            selected[c] = true;
            let mut stack = clusters[c].children.clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend(clusters[d].children.iter().copied());
            }
        }
    }
    selected
}

/// Density-based clustering with `min_samples = 2`; unclustered rows get [`OUTLIER`].
///
/// Cluster ids are numbered by the smallest row index they contain.
pub fn hdbscan(rows: &[Vec<f64>], min_cluster_size: usize) -> Result<ClusterAssignment> {
    if rows.len() < 2 {
        return Err(Error::contract("HDBSCAN needs at least two rows"));
    }
    if min_cluster_size < 2 {
        return Err(Error::contract("minimum cluster size must be at least 2"));
    }
    let n = rows.len();
    let edges = mutual_reachability_mst(rows, HDBSCAN_MIN_SAMPLES)?;
    let merges = single_linkage(n, edges);
    let clusters = condense(n, &merges, min_cluster_size);
    let selected = select_eom(&clusters);

    let mut home = vec![0usize; n];
    for (c, cl) in clusters.iter().enumerate() {
        for &(p, _) in &cl.departures {
            home[p] = c;
        }
    }
    let mut raw = vec![None; n];
    for p in 0..n {
        let mut c = Some(home[p]);
        while let Some(id) = c {
            if selected[id] {
                raw[p] = Some(id);
                break;
            }
            c = clusters[id].parent;
        }
    }
    let mut order: Vec<usize> = Vec::new();
    for id in raw.iter().flatten() {
        if !order.contains(id) {
            order.push(*id);
        }
    }
    let labels = raw
        .iter()
        .map(|r| r.map_or(OUTLIER, |id| order.iter().position(|&o| o == id).unwrap() as i64))
        .collect();
    ClusterAssignment::from_labels(labels, order.len())
}
