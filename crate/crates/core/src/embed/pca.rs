// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two-component PCA by power iteration with deflation, for plot export.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::rng_for;

use super::{feature_matrix, Embedding};

const TOL: f64 = 1e-9;
const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub coords: Vec<[f64; 2]>,
    /// Variance along each component (divisor `n − 1`).
    pub explained_variance: [f64; 2],
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Xᵀ X v` for centred rows `X`.
fn gram_apply(x: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for row in x {
        let s: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, r) in out.iter_mut().zip(row) {
            *o += s * r;
        }
    }
    out
}

fn orthogonalise(v: &mut [f64], against: &[Vec<f64>]) {
    for d in against {
        let p: f64 = v.iter().zip(d).map(|(a, b)| a * b).sum();
        for (x, y) in v.iter_mut().zip(d) {
            *x -= p * y;
        }
    }
}

/// Leading unit eigenvector of `XᵀX` orthogonal to `found`, or `None` when
/// the remaining spectrum is numerically zero.
fn leading_direction(x: &[Vec<f64>], found: &[Vec<f64>], scale: f64, seed_tag: u64) -> Option<Vec<f64>> {
    let d = x[0].len();
    let mut rng = rng_for(0, &[seed_tag]);
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthogonalise(&mut v, found);
    let nv = norm(&v);
    if nv == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= nv);
    for _ in 0..MAX_ITER {
        let mut w = gram_apply(x, &v);
        orthogonalise(&mut w, found);
        let nw = norm(&w);
        if nw <= 1e-12 * scale {
            return None;
        }
        w.iter_mut().for_each(|a| *a /= nw);
        let diff = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if diff < TOL {
            break;
        }
    }
    let pivot = v
        .iter()
        .enumerate()
        .fold(0, |best, (i, a)| if a.abs() > v[best].abs() { i } else { best });
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    Some(v)
}

/// Projects mean-centred embeddings onto their top two principal
/// directions. Signs are fixed so each direction's largest entry is
/// positive. Missing directions (rank < 2) give zero coordinates.
pub fn pca_project(embs: &[Embedding]) -> Result<PcaProjection> {
    if embs.len() < 2 {
        return Err(invalid("PCA needs at least two embeddings"));
    }
    let fm = feature_matrix(embs)?;
    let n = fm.rows.len();
    let d = fm.columns.len();
    let mut x = fm.rows;
    for j in 0..d {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        for r in &mut x {
            r[j] -= m;
        }
    }
    let scale: f64 = x.iter().flatten().map(|a| a * a).sum();
    let mut coords = vec![[0.0; 2]; n];
    let mut explained_variance = [0.0; 2];
    if d == 0 || scale == 0.0 {
        return Ok(PcaProjection {
            coords,
            explained_variance,
        });
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    for c in 0..2 {
        let Some(dir) = leading_direction(&x, &found, scale, c as u64) else {
            break;
        };
        let proj: Vec<f64> = x
            .iter()
            .map(|r| r.iter().zip(&dir).map(|(a, b)| a * b).sum())
            .collect();
        if let Some(p) = proj.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                location: "PCA projection".into(),
                value: *p,
            });
        }
        for (slot, p) in coords.iter_mut().zip(&proj) {
            slot[c] = *p;
        }
        explained_variance[c] = proj.iter().map(|p| p * p).sum::<f64>() / (n - 1) as f64;
        found.push(dir);
    }
    Ok(PcaProjection {
        coords,
        explained_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Rep;

    fn embs(rows: &[Vec<f64>]) -> Vec<Embedding> {
        rows.iter()
            .map(|r| Embedding::dense(Rep::Coarse, r.clone()).unwrap())
            .collect()
    }

    #[test]
    fn collinear_points_have_no_second_component() {
        let p = pca_project(&embs(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 6.0]])).unwrap();
        assert!(p.coords.iter().all(|c| c[1].abs() < 1e-9));
    }

    #[test]
    fn two_points_are_separated_by_their_distance() {
        let p = pca_project(&embs(&[vec![1.0, 1.0, 0.0], vec![4.0, 5.0, 0.0]])).unwrap();
        assert!(((p.coords[0][0] - p.coords[1][0]).abs() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn identical_points_project_to_zero() {
        let p = pca_project(&embs(&[vec![2.0, 1.0], vec![2.0, 1.0]])).unwrap();
        assert_eq!(p.coords, vec![[0.0; 2]; 2]);
        assert!(pca_project(&embs(&[vec![1.0]])).is_err());
    }
}
