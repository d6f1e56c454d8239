use std::collections::BTreeMap;

use crate::error::Result;

/// `1 - max similarity` below this counts as an exact duplicate.
const SIMILARITY_EPS: f64 = 1e-12;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// FoolsGold learning-rate weights in `[0, 1]` from per-peer gradient histories.
///
/// Pairwise cosine similarity (self-similarity counted as 0), pardoning of
/// peers whose maximum similarity is below their partner's, `1 - max`
/// similarity clipped to `[0, 1]` (values under 1e-12 snap to 0), rescaled by the maximum weight, then the
/// logit `ln(w / (1 - w)) + 0.5` clipped to `[0, 1]`.
pub fn foolsgold_weights(histories: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = histories.len();
    if n < 2 {
        return Ok(vec![1.0; n]);
    }
    let mut cs = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = cosine(&histories[i], &histories[j]);
            cs[i][j] = c;
            cs[j][i] = c;
        }
    }
    let maxcs: Vec<f64> = cs.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && maxcs[i] < maxcs[j] {
                cs[i][j] *= maxcs[i] / maxcs[j];
            }
        }
    }
    let mut wv: Vec<f64> = cs
        .iter()
        .map(|row| {
            let w = 1.0 - row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // Cosine rounding leaves identical histories a few ulps short of 1.
            if w < SIMILARITY_EPS { 0.0 } else { w.min(1.0) }
        })
        .collect();
    let top = wv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for w in &mut wv {
        *w /= top;
        if *w == 1.0 {
            *w = 0.99;
        }
        let logit = (*w / (1.0 - *w)).ln() + 0.5;
        *w = if logit.is_nan() { 0.0 } else { logit.clamp(0.0, 1.0) };
    }
    Ok(wv)
}

/// Running per-peer sums of output-layer gradients.
#[derive(Clone, Debug, Default)]
pub struct FoolsGold {
    history: BTreeMap<usize, Vec<f64>>,
}

impl FoolsGold {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds this round's gradients to the histories of `peers` and returns
    /// their weights, in the order given.
    pub fn update(&mut self, peers: &[usize], gradients: &[&[f64]]) -> Result<Vec<f64>> {
        for (&p, g) in peers.iter().zip(gradients) {
            let h = self.history.entry(p).or_insert_with(|| vec![0.0; g.len()]);
            h.iter_mut().zip(g.iter()).for_each(|(a, v)| *a += v);
        }
        let hist: Vec<Vec<f64>> = peers.iter().map(|p| self.history[p].clone()).collect();
        foolsgold_weights(&hist)
    }
}
