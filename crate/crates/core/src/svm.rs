// SPDX-License-Identifier: MIT OR Apache-2.0

//! Soft-margin SVM on a precomputed kernel, solved by SMO with
//! maximal-violating-pair selection, plus one-vs-rest multiclass.

use rand::seq::SliceRandom;

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMatrix;
use crate::rng::rng_for;

pub const KKT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;
/// SMO iteration cap is `max(MIN_ITER, ITER_PER_POINT · n)`.
pub const ITER_PER_POINT: usize = 1000;
const MIN_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Dual coefficients, one per training point.
    pub alpha: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Stopped on the KKT tolerance rather than the iteration cap.
    pub converged: bool,
}

impl SvmModel {
    /// Box constraints `0 ≤ α_i ≤ C` and `|Σ α_i y_i| ≤ 1e-9 · C · n`.
    pub fn check_dual_feasibility(&self) -> Result<()> {
        if let Some(a) = self.alpha.iter().find(|a| !(0.0..=self.c).contains(*a)) {
            return Err(Error::Numeric(format!("dual coefficient {a} outside [0, {}]", self.c)));
        }
        let eq: f64 = self.alpha.iter().zip(&self.labels).map(|(a, y)| a * y).sum();
        if eq.abs() > 1e-9 * self.c * self.alpha.len() as f64 {
            return Err(Error::Numeric(format!("equality constraint violated by {eq:e}")));
        }
        Ok(())
    }

    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&i| self.alpha[i] > 0.0).collect()
    }

    /// `Σ_i α_i y_i k(x, x_i) + b` for one row of test-vs-train kernel values.
    pub fn decision(&self, k_row: &[f64]) -> Result<f64> {
        if k_row.len() != self.alpha.len() {
            return Err(Error::Shape(format!(
                "kernel row has {} entries, model has {} training points",
                k_row.len(),
                self.alpha.len()
            )));
        }
        Ok(self
            .alpha
            .iter()
            .zip(&self.labels)
            .zip(k_row)
            .map(|((a, y), k)| a * y * k)
            .sum::<f64>()
            + self.bias)
    }
}

/// Trains on labels in `{−1, +1}`. `seed` fixes the scan order that breaks
/// ties between equally violating candidates.
pub fn svm_train(k: &KernelMatrix, labels: &[f64], c: f64, seed: u64) -> Result<SvmModel> {
    let n = k.n();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for a {n}x{n} kernel", labels.len())));
    }
    if labels.iter().any(|y| *y != 1.0 && *y != -1.0) {
        return Err(invalid("labels must be +1 or -1"));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(invalid("SVM training needs both classes"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("C = {c} must be finite and > 0")));
    }
    let y = labels;
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, &[0x0053_564d]));

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = MIN_ITER.max(ITER_PER_POINT * n);
    let mut converged = false;
    for _ in 0..max_iter {
        let mut i = None;
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        for &t in &order {
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            if up && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i = Some(t);
            }
            let low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if low && -y[t] * grad[t] < g_min {
                g_min = -y[t] * grad[t];
            }
        }
        let Some(i) = i else {
            converged = true;
            break;
        };
        if g_max - g_min < KKT_TOL {
            converged = true;
            break;
        }
        // Second index: largest objective decrease among violating partners.
        let mut j = None;
        let mut best = f64::NEG_INFINITY;
        for &t in &order {
            let low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            let b = g_max + y[t] * grad[t];
            if low && b > 0.0 {
                let a = (k.get(i, i) + k.get(t, t) - 2.0 * k.get(i, t)).max(TAU);
                if b * b / a > best {
                    best = b * b / a;
                    j = Some(t);
                }
            }
        }
        let Some(j) = j else {
            converged = true;
            break;
        };

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let a = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / a;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            } else if diff <= 0.0 && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            } else if diff <= 0.0 && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / a;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            } else if sum <= c && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            } else if sum <= c && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // Bias from free vectors, else the midpoint of the feasible interval.
    let mut free_sum = 0.0;
    let mut free_n = 0usize;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            free_n += 1;
        } else if (alpha[t] == 0.0 && y[t] > 0.0) || (alpha[t] == c && y[t] < 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        0.5 * (ub + lb)
    };
    if !rho.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numeric("SVM solver produced non-finite values".into()));
    }
    Ok(SvmModel {
        alpha,
        labels: labels.to_vec(),
        bias: -rho,
        c,
        converged,
    })
}

/// Sign of the decision function; exactly zero maps to `+1`.
pub fn svm_predict(model: &SvmModel, k_test: &[Vec<f64>]) -> Result<Vec<f64>> {
    k_test
        .iter()
        .map(|row| Ok(if model.decision(row)? >= 0.0 { 1.0 } else { -1.0 }))
        .collect()
}

/// Binary model for two classes (class 0 is `+1`), one-vs-rest otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvm {
    pub n_classes: usize,
    pub models: Vec<SvmModel>,
}

impl MulticlassSvm {
    pub fn train(k: &KernelMatrix, classes: &[usize], n_classes: usize, c: f64, seed: u64) -> Result<Self> {
        Self::train_with(k, classes, n_classes, c, seed, n_classes > 2)
    }

    /// Forces one-vs-rest even for two classes.
    pub fn train_ovr(k: &KernelMatrix, classes: &[usize], n_classes: usize, c: f64, seed: u64) -> Result<Self> {
        Self::train_with(k, classes, n_classes, c, seed, true)
    }

    fn train_with(
        k: &KernelMatrix,
        classes: &[usize],
        n_classes: usize,
        c: f64,
        seed: u64,
        ovr: bool,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(invalid("need at least two classes"));
        }
        if let Some(bad) = classes.iter().find(|&&s| s >= n_classes) {
            return Err(invalid(format!("class {bad} out of range")));
        }
        let heads = if ovr { n_classes } else { 1 };
        let models = (0..heads)
            .map(|s| {
                let y: Vec<f64> = classes.iter().map(|&l| if l == s { 1.0 } else { -1.0 }).collect();
                svm_train(k, &y, c, seed.wrapping_add(s as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_classes, models })
    }

    /// Argmax of the per-class decision values (first class on ties).
    pub fn predict(&self, k_test: &[Vec<f64>]) -> Result<Vec<usize>> {
        k_test
            .iter()
            .map(|row| {
                if self.models.len() == 1 {
                    return Ok(if self.models[0].decision(row)? >= 0.0 { 0 } else { 1 });
                }
                let mut best = (0, f64::NEG_INFINITY);
                for (s, m) in self.models.iter().enumerate() {
                    let d = m.decision(row)?;
                    if d > best.1 {
                        best = (s, d);
                    }
                }
                Ok(best.0)
            })
            .collect()
    }
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{cross_kernel, linear_kernel, rbf_kernel, KernelKind};

    fn train_acc(xs: &[Vec<f64>], y: &[f64], k: &KernelMatrix, c: f64) -> f64 {
        let m = svm_train(k, y, c, 0).unwrap();
        let rows: Vec<Vec<f64>> = (0..xs.len()).map(|i| k.matrix.row(i).to_vec()).collect();
        let p = svm_predict(&m, &rows).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn two_separable_points() {
        let xs = vec![vec![1.0, 0.0], vec![-1.0, 0.5]];
        let y = [1.0, -1.0];
        assert_eq!(train_acc(&xs, &y, &linear_kernel(&xs).unwrap(), 1.0), 1.0);
    }

    #[test]
    fn xor_needs_a_nonlinear_kernel() {
        let xs = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = [1.0, 1.0, -1.0, -1.0];
        assert!(train_acc(&xs, &y, &linear_kernel(&xs).unwrap(), 1.0) <= 0.75);
        assert_eq!(train_acc(&xs, &y, &rbf_kernel(&xs, Some(1.0)).unwrap(), 10.0), 1.0);
    }

    #[test]
    fn contradictory_duplicates() {
        let xs = vec![vec![1.0], vec![1.0]];
        assert_eq!(train_acc(&xs, &[1.0, -1.0], &linear_kernel(&xs).unwrap(), 1.0), 0.5);
    }

    #[test]
    fn dual_feasibility() {
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let k = rbf_kernel(&xs, None).unwrap();
        let m = svm_train(&k, &y, 1.0, 3).unwrap();
        assert!(m.converged);
        assert!(m.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
        let eq: f64 = m.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(eq.abs() < 1e-9);
    }

    #[test]
    fn zero_decision_maps_to_plus_one() {
        let m = SvmModel {
            alpha: vec![0.0, 0.0],
            labels: vec![1.0, -1.0],
            bias: 0.0,
            c: 1.0,
            converged: true,
        };
        assert_eq!(svm_predict(&m, &[vec![3.0, 4.0]]).unwrap(), vec![1.0]);
        assert!(svm_predict(&m, &[vec![1.0]]).is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        let k = linear_kernel(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(svm_train(&k, &[1.0, 1.0], 1.0, 0).is_err());
    }

    #[test]
    fn ovr_on_two_classes_matches_binary() {
        let xs: Vec<Vec<f64>> = (0..16)
            .map(|i| vec![(i as f64).sin() + if i < 8 { 1.0 } else { -1.0 }, (i as f64 * 0.7).cos()])
            .collect();
        let cls: Vec<usize> = (0..16).map(|i| usize::from(i >= 8)).collect();
        let k = rbf_kernel(&xs, None).unwrap();
        let test: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.3 - 1.5, 0.2]).collect();
        let kt = cross_kernel(KernelKind::Rbf, k.gamma, &test, &xs).unwrap();
        let bin = MulticlassSvm::train(&k, &cls, 2, 1.0, 0).unwrap().predict(&kt).unwrap();
        let ovr = MulticlassSvm::train_ovr(&k, &cls, 2, 1.0, 0).unwrap().predict(&kt).unwrap();
        assert_eq!(bin, ovr);
    }

    #[test]
    fn four_class_blobs() {
        let centres = [[3.0, 0.0], [0.0, 3.0], [-3.0, 0.0], [0.0, -3.0]];
        let mut xs = Vec::new();
        let mut cls = Vec::new();
        for (s, c) in centres.iter().enumerate() {
            for i in 0..6 {
                let t = i as f64;
                xs.push(vec![c[0] + 0.3 * t.sin(), c[1] + 0.3 * t.cos()]);
                cls.push(s);
            }
        }
        let k = linear_kernel(&xs).unwrap();
        let m = MulticlassSvm::train(&k, &cls, 4, 1.0, 0).unwrap();
        let rows: Vec<Vec<f64>> = (0..xs.len()).map(|i| k.matrix.row(i).to_vec()).collect();
        assert_eq!(accuracy(&m.predict(&rows).unwrap(), &cls), 1.0);
    }
}
