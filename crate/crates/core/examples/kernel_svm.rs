// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear and RBF kernel SVMs on two noisy Gaussian blobs, including the
//! one-vs-rest path.
//!
//! `cargo run --example kernel_svm`

use rand::Rng;
use rand_distr::StandardNormal;

use patchgraph::kernel::{cross_kernel, linear_kernel, median_heuristic_gamma, rbf_kernel, KernelKind};
use patchgraph::rng::{rng_for, tag};
use patchgraph::svm::{accuracy, MulticlassSvm};

fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng_for(seed, &[tag("blobs")]);
    let centres = [[-1.0, 0.0], [1.0, 0.5], [0.0, 2.0]];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let c = i % centres.len();
        xs.push(centres[c].iter().map(|m| m + 0.6 * rng.sample::<f64, _>(StandardNormal)).collect());
        ys.push(c);
    }
    (xs, ys)
}

fn main() -> patchgraph::Result<()> {
    let (train, train_y) = blobs(90, 1);
    let (test, test_y) = blobs(60, 2);
    for kind in [KernelKind::Linear, KernelKind::Rbf] {
        let (k, gamma) = match kind {
            KernelKind::Linear => (linear_kernel(&train)?, None),
            KernelKind::Rbf => {
                let g = median_heuristic_gamma(&train)?;
                (rbf_kernel(&train, Some(g))?, Some(g))
            }
        };
        k.check_psd()?;
        let model = MulticlassSvm::train(&k, &train_y, 3, 1.0, 0)?;
        for m in &model.models {
            m.check_dual_feasibility()?;
        }
        let pred = model.predict(&cross_kernel(kind, gamma, &test, &train)?)?;
        let svs: Vec<usize> = model.models.iter().map(|m| m.support_indices().len()).collect();
        println!("{kind}: accuracy {:.3}, support vectors per head {svs:?}", accuracy(&pred, &test_y));
    }
    Ok(())
}
