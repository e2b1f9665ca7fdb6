// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small descriptive and inferential statistics helpers.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with divisor `n`.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Standard deviation with divisor `n - 1` (0 for fewer than two values).
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Percentile with linear interpolation between closest ranks
/// (rank = p/100 · (n − 1)). Returns 0 for an empty slice.
pub fn percentile_linear(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// One-sided one-sample t-test of `H1: mean > 0`. Returns the p-value.
///
/// Degenerate samples with zero spread give p = 0 when the mean is positive and
/// p = 1 otherwise.
pub fn t_test_greater_than_zero(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 1.0;
    }
    let m = mean(xs);
    let sd = sample_std(xs);
    if sd == 0.0 || !sd.is_finite() {
        return if m > 0.0 { 0.0 } else { 1.0 };
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid t distribution");
    (1.0 - dist.cdf(t)).clamp(0.0, 1.0)
}

/// One-sided Mann–Whitney rank-sum test of `H1: a tends to exceed b`, normal
/// approximation with tie and continuity correction.
pub fn rank_sum_greater(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return 1.0;
    }
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = avg;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let r1: f64 = all
        .iter()
        .zip(&ranks)
        .filter(|(x, _)| x.1)
        .map(|(_, r)| r)
        .sum();
    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u1 = r1 - n1f * (n1f + 1.0) / 2.0;
    let mu = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return if u1 > mu { 0.0 } else { 1.0 };
    }
    let z = (u1 - mu - 0.5) / var.sqrt();
    let normal = Normal::standard();
    (1.0 - normal.cdf(z)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_of_one_to_hundred() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        // sorted[98] + 0.01 * (sorted[99] - sorted[98])
        assert!((percentile_linear(&xs, 99.0) - 99.01).abs() < 1e-12);
        assert_eq!(percentile_linear(&xs, 0.0), 1.0);
        assert_eq!(percentile_linear(&xs, 100.0), 100.0);
    }

    #[test]
    fn population_std_of_constant_is_zero() {
        assert_eq!(population_std(&[0.75, 0.75, 0.75]), 0.0);
        assert!((population_std(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_test_direction() {
        let pos = [0.9, 1.1, 1.0, 0.95, 1.05];
        assert!(t_test_greater_than_zero(&pos) < 1e-4);
        let neg: Vec<f64> = pos.iter().map(|x| -x).collect();
        assert!(t_test_greater_than_zero(&neg) > 0.99);
        assert_eq!(t_test_greater_than_zero(&[0.0; 5]), 1.0);
    }

    #[test]
    fn rank_sum_direction() {
        let a: Vec<f64> = (10..30).map(f64::from).collect();
        let b: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(rank_sum_greater(&a, &b) < 0.01);
        assert!(rank_sum_greater(&b, &a) > 0.99);
        let p = rank_sum_greater(&b, &b);
        assert!(p > 0.4 && p < 0.6);
    }
}
