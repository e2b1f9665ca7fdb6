// SPDX-License-Identifier: MIT OR Apache-2.0

//! Normalised-Laplacian spectrum plus two eigenvector histograms.

use crate::error::Result;
use crate::graph::PatchGraph;
use crate::linalg::{symmetric_eigen, SquareMatrix};

use super::{Embedding, Rep};

const N_EIGENVALUES: usize = 64;
const HIST_BINS: usize = 16;
pub const SPECTRAL_DIM: usize = N_EIGENVALUES + 2 * HIST_BINS;

/// `L_sym = I − D^{−1/2} A D^{−1/2}` with `A = |W| + |W|ᵀ`. Isolated nodes
/// get an all-zero row, hence eigenvalue 0.
pub fn normalised_laplacian(g: &PatchGraph) -> SquareMatrix {
    let n = g.nodes().len();
    let mut a = SquareMatrix::zeros(n);
    for e in g.edges() {
        let w = e.weight.abs();
        a.set(e.src, e.dst, a.get(e.src, e.dst) + w);
        a.set(e.dst, e.src, a.get(e.dst, e.src) + w);
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    SquareMatrix::from_fn(n, |i, j| {
        let diag = if i == j && inv_sqrt[i] > 0.0 { 1.0 } else { 0.0 };
        diag - inv_sqrt[i] * a.get(i, j) * inv_sqrt[j]
    })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &[f64]) -> Vec<f64> {
    let pivot = v
        .iter()
        .enumerate()
        .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v.get(pivot).is_some_and(|x| *x < 0.0) {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    }
}

/// Fraction of entries in each of 16 equal bins over `[−1, 1]`.
fn histogram(v: &[f64]) -> [f64; HIST_BINS] {
    let mut h = [0.0; HIST_BINS];
    for x in v {
        let b = (((x + 1.0) / 2.0) * HIST_BINS as f64).floor();
        h[(b.max(0.0) as usize).min(HIST_BINS - 1)] += 1.0;
    }
    for c in &mut h {
        *c /= v.len() as f64;
    }
    h
}

/// 64 smallest eigenvalues (zero padded), then histograms of the Fiedler
/// vector (second smallest) and of the top eigenvector. Eigenvector signs
/// are fixed by their largest entry. Edgeless graphs map to zero.
pub fn spectral_embed(g: &PatchGraph) -> Result<Embedding> {
    let mut v = vec![0.0; SPECTRAL_DIM];
    if g.n_edges() > 0 {
        let eig = symmetric_eigen(&normalised_laplacian(g))?;
        for (slot, lambda) in v.iter_mut().zip(&eig.values) {
            *slot = lambda.max(0.0);
        }
        let n = eig.values.len();
        let fiedler = fix_sign(&eig.vectors[1.min(n - 1)]);
        let top = fix_sign(&eig.vectors[n - 1]);
        v[N_EIGENVALUES..N_EIGENVALUES + HIST_BINS].copy_from_slice(&histogram(&fiedler));
        v[N_EIGENVALUES + HIST_BINS..].copy_from_slice(&histogram(&top));
    }
    Embedding::dense(Rep::Spectral, v)
}

#[cfg(test)]
mod tests {
    use super::super::tests::graph;
    use super::*;

    #[test]
    fn empty_graph_is_zero() {
        let e = spectral_embed(&graph(3, 3, &[])).unwrap();
        assert!(e.nonzeros().is_empty());
        assert_eq!(e.dim, 96);
    }

    #[test]
    fn k2_spectrum() {
        let e = spectral_embed(&graph(1, 2, &[(0, 1, -0.4)])).unwrap();
        let v = e.as_dense().unwrap();
        assert!(v[0].abs() < 1e-12);
        assert!((v[1] - 2.0).abs() < 1e-12);
        assert!(v[2..64].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn complete_graph_spectrum() {
        let n = 6;
        let edges: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v, 0.7)))
            .collect();
        let e = spectral_embed(&graph(1, n, &edges)).unwrap();
        let v = e.as_dense().unwrap();
        assert!(v[0].abs() < 1e-10);
        for x in &v[1..n] {
            assert!((x - n as f64 / (n - 1) as f64).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn isolated_nodes_contribute_zero_eigenvalues() {
        let e = spectral_embed(&graph(2, 2, &[(0, 3, 1.0)])).unwrap();
        let v = e.as_dense().unwrap();
        assert!(v[..3].iter().all(|x| x.abs() < 1e-12));
        assert!((v[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn histograms_sum_to_one() {
        let e = spectral_embed(&graph(2, 3, &[(0, 3, 1.0), (1, 4, 0.5), (3, 5, -0.2)])).unwrap();
        let v = e.as_dense().unwrap();
        assert!((v[64..80].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((v[80..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
