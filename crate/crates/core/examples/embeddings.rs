// SPDX-License-Identifier: MIT OR Apache-2.0

//! Every graph representation for planted bootstrap graphs, plus a PCA view.
//!
//! `cargo run --example embeddings`

use patchgraph::embed::{embed, pca_project, triad_census, EmbedParams, Rep, TRIAD_NAMES};
use patchgraph::eval::{bootstrap_graphs, ProtocolConfig};
use patchgraph::toy::{gen_planted_tensors, PlantedConfig};

fn main() -> patchgraph::Result<()> {
    let tensors = gen_planted_tensors(&PlantedConfig::default())?;
    let cfg = ProtocolConfig::default();
    let params = EmbedParams::default();
    let mut graphs = Vec::new();
    for (s, t) in tensors.iter().enumerate() {
        let pool: Vec<usize> = (0..t.n_examples()).collect();
        graphs.extend(bootstrap_graphs(t, &pool, &cfg, 8, s as u64)?.into_iter().map(|g| (s, g)));
    }

    let g = &graphs[0].1;
    for rep in Rep::ALL {
        let e = embed(g, rep, &params)?;
        println!("{:<16} dim {:>6}", rep.as_str(), e.dim);
    }
    let census = triad_census(g);
    let common: Vec<_> = TRIAD_NAMES.iter().zip(census.counts.iter()).filter(|(_, c)| **c > 0).collect();
    println!("triad census (nonzero): {common:?}");

    for rep in [Rep::FixedWeighted, Rep::Spectral] {
        let embs = graphs.iter().map(|(_, g)| embed(g, rep, &params)).collect::<patchgraph::Result<Vec<_>>>()?;
        let p = pca_project(&embs)?;
        println!("{rep}: PC variances {:.3?}", p.explained_variance);
        for ((s, _), c) in graphs.iter().zip(&p.coords).step_by(4) {
            println!("  slice {s}: ({:+.3}, {:+.3})", c[0], c[1]);
        }
    }
    Ok(())
}
