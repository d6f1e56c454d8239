//! Two-component PCA by power iteration, for plotting gradient features.

use super::check_rows;
use crate::error::{Error, Result};

const TOL: f64 = 1e-10;
const MAX_ITERS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    /// Unit principal axes; the largest-magnitude entry of each is positive.
    pub components: [Vec<f64>; 2],
    /// Variance (sample covariance eigenvalue) along each axis.
    pub explained_variance: [f64; 2],
    pub coords: Vec<[f64; 2]>,
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], against: &[&[f64]]) {
    for a in against {
        let p = dot(v, a);
        v.iter_mut().zip(a.iter()).for_each(|(x, y)| *x -= p * y);
    }
}

/// Fixed, non-degenerate start vector.
fn start_vector(dim: usize, salt: usize) -> Vec<f64> {
    (0..dim).map(|i| 1.0 + ((i * 7919 + salt * 104_729) % 1000) as f64 * 1e-3).collect()
}

/// Any unit vector orthogonal to `against`, from the standard basis.
fn basis_fallback(dim: usize, against: &[&[f64]]) -> Vec<f64> {
    for i in 0..dim {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        orthogonalize(&mut v, against);
        if normalize(&mut v) > 1e-6 {
            return v;
        }
    }
    vec![0.0; dim]
}

fn dominant(cov: &[Vec<f64>], against: &[&[f64]], salt: usize) -> (Vec<f64>, f64) {
    let dim = cov.len();
    let mut v = start_vector(dim, salt);
    orthogonalize(&mut v, against);
    if normalize(&mut v) == 0.0 {
        return (basis_fallback(dim, against), 0.0);
    }
    for _ in 0..MAX_ITERS {
        let mut w = matvec(cov, &v);
        orthogonalize(&mut w, against);
        if normalize(&mut w) <= f64::EPSILON {
            return (v, 0.0);
        }
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        v = w;
        if delta < TOL {
            break;
        }
    }
    let eig = dot(&v, &matvec(cov, &v)).max(0.0);
    (v, eig)
}

fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v.get(idx).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Projects mean-centred rows onto the top two principal axes.
pub fn pca_top2(rows: &[Vec<f64>]) -> Result<Pca2> {
    if rows.len() < 2 {
        return Err(Error::contract("PCA needs at least two rows"));
    }
    let dim = check_rows(rows)?;
    if dim < 2 {
        return Err(Error::contract("PCA to two components needs rows of dimension >= 2"));
    }
    let n = rows.len();
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for r in &centred {
        for i in 0..dim {
            for j in i..dim {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let (mut pc1, l1) = dominant(&cov, &[], 0);
    if l1 == 0.0 {
        pc1 = basis_fallback(dim, &[]);
    }
    fix_sign(&mut pc1);
    let (mut pc2, l2) = dominant(&cov, &[&pc1], 1);
    fix_sign(&mut pc2);
    let coords = centred.iter().map(|r| [dot(r, &pc1), dot(r, &pc2)]).collect();
    Ok(Pca2 { mean, components: [pc1, pc2], explained_variance: [l1, l2], coords })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = pca_top2(&rows).unwrap();
        let s = 1.0 / 5f64.sqrt();
        assert!((p.components[0][0] - s).abs() < 1e-9 && (p.components[0][1] - 2.0 * s).abs() < 1e-9);
        assert!(p.explained_variance[1].abs() < 1e-12);
        assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-12);
    }

    #[test]
    fn rank_zero_gives_zero_coordinates() {
        let rows = vec![vec![1.0, 2.0, 3.0]; 4];
        let p = pca_top2(&rows).unwrap();
        assert!(p.coords.iter().all(|c| c[0] == 0.0 && c[1] == 0.0));
        assert_eq!(p.explained_variance, [0.0, 0.0]);
    }

    #[test]
    fn sign_convention() {
        let rows = vec![vec![0.0, 0.0], vec![-3.0, 0.1], vec![3.0, -0.1], vec![0.5, 0.0]];
        let p = pca_top2(&rows).unwrap();
        for c in &p.components {
            let big = c.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
    }
}
