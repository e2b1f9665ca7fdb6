// SPDX-License-Identifier: MIT OR Apache-2.0

//! Writes a toy effect tensor to disk, reads it back and renders its
//! mean-effect heatmap as SVG.
//!
//! `cargo run --example tensor_io -- out_dir`

use std::path::PathBuf;

use patchgraph::plot::heatmap_svg;
use patchgraph::tensor::{heatmap_stats, read_effect_tensor, write_effect_tensor, SliceId};
use patchgraph::toy::{build_effect_tensor, build_toy_model, gen_prompt_family, Corruption, PromptFamily, ToyModelConfig};

fn main() -> patchgraph::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("patchgraph-tensor"), PathBuf::from);
    let model = build_toy_model(&ToyModelConfig::default())?;
    let cfg = model.config().clone();
    let pairs = gen_prompt_family(PromptFamily::InductionLike, Corruption::PrefixSwap, 40, cfg.tokens, cfg.vocab, 3)?;
    let t = build_effect_tensor(&model, SliceId::new("induction-like", "prefix-swap"), &pairs, None)?;

    write_effect_tensor(&t, &out)?;
    let back = read_effect_tensor(&out)?;
    assert_eq!(back, t);
    println!("{} examples x {} nodes round-tripped through {}", back.n_examples(), back.n_nodes(), out.display());

    let stats = heatmap_stats(&back)?;
    for (l, row) in stats.grid.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:+.2}")).collect();
        println!("L{l}  {}", cells.join(" "));
    }
    let svg = out.join("heatmap.svg");
    std::fs::write(&svg, heatmap_svg(&stats))?;
    println!("colour limit ±{:.3}, wrote {}", stats.robust_limit, svg.display());
    Ok(())
}
