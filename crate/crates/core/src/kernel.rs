// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear and RBF kernels over dense feature rows.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigen, SquareMatrix};
use crate::tensor::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Rbf => "rbf",
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "rbf" => Ok(Self::Rbf),
            _ => Err(invalid(format!("unknown kernel {s:?}"))),
        }
    }
}

/// Most negative eigenvalue tolerated, relative to `max(1, max diagonal)`.
pub const PSD_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    pub gamma: Option<f64>,
    pub matrix: SquareMatrix,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(symmetric_eigen(&self.matrix)?.values.first().copied().unwrap_or(0.0))
    }

    /// Errors unless the matrix is symmetric and PSD within tolerance.
    pub fn check_psd(&self) -> Result<()> {
        let n = self.n();
        let scale = (0..n).map(|i| self.get(i, i).abs()).fold(1.0, f64::max);
        if self.matrix.asymmetry() > 1e-12 * scale {
            return Err(Error::Numeric("kernel matrix is not symmetric".into()));
        }
        let lmin = self.min_eigenvalue()?;
        if lmin < -PSD_SLACK * scale {
            return Err(Error::Numeric(format!("kernel matrix has eigenvalue {lmin:e}")));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.n() {
            w.write_record(self.matrix.row(i).iter().map(|x| fmt_f64(*x)))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_dims(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<usize> {
    let d = xs.first().or(ys.first()).map_or(0, Vec::len);
    if let Some(bad) = xs.iter().chain(ys).find(|x| x.len() != d) {
        return Err(Error::Shape(format!("feature dims differ: {d} vs {}", bad.len())));
    }
    Ok(d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn gram(xs: &[Vec<f64>], f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> SquareMatrix {
    let n = xs.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| f(&xs[i], &xs[j])).collect())
        .collect();
    let mut m = SquareMatrix::zeros(n);
    for (i, row) in upper.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            m.set(i, i + k, *v);
            m.set(i + k, i, *v);
        }
    }
    m
}

pub fn linear_kernel(xs: &[Vec<f64>]) -> Result<KernelMatrix> {
    check_dims(xs, &[])?;
    Ok(KernelMatrix {
        kind: KernelKind::Linear,
        gamma: None,
        matrix: gram(xs, dot),
    })
}

/// `gamma = 1 / (2·m)` with `m` the median squared distance over index
/// pairs `i < j` (mean of the middle two for an even count).
pub fn median_heuristic_gamma(xs: &[Vec<f64>]) -> Result<f64> {
    check_dims(xs, &[])?;
    let mut d2: Vec<f64> = (0..xs.len())
        .flat_map(|i| (i + 1..xs.len()).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(&xs[i], &xs[j]))
        .collect();
    if d2.is_empty() {
        return Err(invalid("median heuristic needs at least two points"));
    }
    d2.sort_by(f64::total_cmp);
    let k = d2.len();
    let m = if k % 2 == 1 { d2[k / 2] } else { 0.5 * (d2[k / 2 - 1] + d2[k / 2]) };
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid(format!("median squared distance is {m}; gamma undefined")));
    }
    Ok(1.0 / (2.0 * m))
}

pub fn rbf_kernel(xs: &[Vec<f64>], gamma: Option<f64>) -> Result<KernelMatrix> {
    let gamma = match gamma {
        Some(g) if g >= 0.0 && g.is_finite() => g,
        Some(g) => return Err(invalid(format!("gamma {g} must be finite and >= 0"))),
        None => median_heuristic_gamma(xs)?,
    };
    check_dims(xs, &[])?;
    let mut matrix = gram(xs, |a, b| (-gamma * sq_dist(a, b)).exp());
    for i in 0..xs.len() {
        matrix.set(i, i, 1.0);
    }
    Ok(KernelMatrix {
        kind: KernelKind::Rbf,
        gamma: Some(gamma),
        matrix,
    })
}

/// Rows `k(test_i, train_j)` for prediction.
pub fn cross_kernel(
    kind: KernelKind,
    gamma: Option<f64>,
    test: &[Vec<f64>],
    train: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    check_dims(test, train)?;
    let gamma = match (kind, gamma) {
        (KernelKind::Rbf, Some(g)) => g,
        (KernelKind::Rbf, None) => return Err(invalid("RBF cross kernel needs gamma")),
        (KernelKind::Linear, _) => 0.0,
    };
    Ok(test
        .par_iter()
        .map(|x| {
            train
                .iter()
                .map(|y| match kind {
                    KernelKind::Linear => dot(x, y),
                    KernelKind::Rbf => (-gamma * sq_dist(x, y)).exp(),
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_inputs_give_identity() {
        let k = linear_kernel(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(k.matrix, SquareMatrix::identity(2));
    }

    #[test]
    fn linear_diagonal_is_squared_norm() {
        let k = linear_kernel(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(k.get(0, 0), 25.0);
    }

    #[test]
    fn median_heuristic_hand_value() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(median_heuristic_gamma(&xs).unwrap(), 0.5);
        let k = rbf_kernel(&xs, None).unwrap();
        assert!((k.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(k.get(2, 2), 1.0);
    }

    #[test]
    fn identical_points_have_no_median_gamma() {
        assert!(rbf_kernel(&[vec![1.0], vec![1.0]], None).is_err());
        assert!(rbf_kernel(&[vec![1.0], vec![1.0]], Some(0.3)).is_ok());
    }

    #[test]
    fn gamma_zero_is_all_ones() {
        let k = rbf_kernel(&[vec![0.0], vec![10.0]], Some(0.0)).unwrap();
        assert_eq!(k.get(0, 1), 1.0);
    }

    #[test]
    fn dimension_mismatch_errors() {
        assert!(matches!(linear_kernel(&[vec![1.0], vec![1.0, 2.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_kernel_matches_gram_block() {
        let xs = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]];
        let k = rbf_kernel(&xs, Some(0.2)).unwrap();
        let c = cross_kernel(KernelKind::Rbf, Some(0.2), &xs[..1], &xs).unwrap();
        for j in 0..3 {
            assert!((c[0][j] - k.get(0, j)).abs() < 1e-15);
        }
    }

    #[test]
    fn psd_check_accepts_gram_and_rejects_indefinite() {
        let k = linear_kernel(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 1.0]]).unwrap();
        k.check_psd().unwrap();
        let bad = KernelMatrix {
            kind: KernelKind::Linear,
            gamma: None,
            matrix: SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        };
        assert!(bad.check_psd().is_err());
    }
}
