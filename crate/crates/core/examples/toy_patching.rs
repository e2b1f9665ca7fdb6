// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single and paired activation patching on the toy transformer.
//!
//! `cargo run --example toy_patching`

use patchgraph::tensor::{mean_effects, NodeId, SliceId};
use patchgraph::toy::{
    build_effect_tensor, build_toy_model, gen_prompt_family, Corruption, PatchSession, PromptFamily,
    ToyModelConfig,
};

fn main() -> patchgraph::Result<()> {
    let model = build_toy_model(&ToyModelConfig::default())?;
    let cfg = model.config().clone();
    let pairs = gen_prompt_family(PromptFamily::BindingTask, Corruption::SwapOne, 20, cfg.tokens, cfg.vocab, 0)?;

    let s = PatchSession::new(&model, &pairs[0])?;
    let gap = s.observable(s.clean()) - s.observable(s.corrupted());
    println!("clean - corrupted logit gap: {gap:+.4}");
    for node in [NodeId::res(0, 1), NodeId::res(2, 1), NodeId::res(cfg.layers - 1, cfg.tokens)] {
        println!("  E[{node}] = {:+.4}", s.patch_effect(&[node])?);
    }
    let (u, v) = (NodeId::res(0, 1), NodeId::res(2, 4));
    println!("  E[{u}, {v}] = {:+.4}", s.patch_effect(&[u, v])?);

    let t = build_effect_tensor(&model, SliceId::new("binding-task", "swap-one"), &pairs, None)?;
    let means = mean_effects(&t)?;
    let mut ranked: Vec<_> = t.nodes().nodes().iter().zip(&means).collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!("strongest mean effects over {} prompts:", t.n_examples());
    for (node, m) in ranked.iter().take(5) {
        println!("  {node:<10} {m:+.4}");
    }
    Ok(())
}
