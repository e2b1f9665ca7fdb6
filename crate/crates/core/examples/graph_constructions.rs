// SPDX-License-Identifier: MIT OR Apache-2.0

//! CI, PC and DI graphs for one toy slice, sparsified to top-k.
//!
//! `cargo run --example graph_constructions`

use patchgraph::graph::{build_ci, build_di, build_pc, precedes, sparsify_topk, PatchGraph, Ridge};
use patchgraph::tensor::SliceId;
use patchgraph::toy::{
    build_effect_tensor, build_toy_model, gen_prompt_family, paired_effects, Corruption, PromptFamily,
    ToyModelConfig,
};

fn show(g: &PatchGraph) {
    println!("{} graph: {} edges", g.construction().as_str(), g.n_edges());
    let mut edges = g.edges().to_vec();
    edges.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()));
    for e in edges.iter().take(4) {
        println!("  {} -> {}  {:+.3}", g.nodes().node(e.src), g.nodes().node(e.dst), e.weight);
    }
}

fn main() -> patchgraph::Result<()> {
    let model = build_toy_model(&ToyModelConfig::default())?;
    let cfg = model.config().clone();
    let pairs = gen_prompt_family(PromptFamily::BindingTask, Corruption::SwapBoth, 60, cfg.tokens, cfg.vocab, 1)?;
    let t = build_effect_tensor(&model, SliceId::new("binding-task", "swap-both"), &pairs, None)?;

    show(&sparsify_topk(&build_ci(&t)?, 5, true)?);
    show(&sparsify_topk(&build_pc(&t, Ridge::Auto)?, 5, true)?);

    // DI needs a joint patch per pair, so restrict it to the earliest layer's sources.
    let nodes = t.nodes().nodes();
    let candidates: Vec<_> = nodes
        .iter()
        .filter(|u| u.layer == 0)
        .flat_map(|u| nodes.iter().filter(move |v| precedes(u, v)).map(move |v| (*u, *v)))
        .collect();
    let di = build_di(&t, &paired_effects(&model, &pairs, &candidates)?)?;
    show(&sparsify_topk(&di, 5, true)?);
    Ok(())
}
