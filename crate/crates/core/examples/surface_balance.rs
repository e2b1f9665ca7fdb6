// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two binding-task corruptions with matched prompt statistics: the surface
//! baseline should sit near chance while graph features separate them.
//!
//! `cargo run --release --example surface_balance`

use patchgraph::embed::Rep;
use patchgraph::eval::{run_benchmark, ProtocolConfig};
use patchgraph::tensor::SliceId;
use patchgraph::toy::{build_effect_tensor, build_toy_model, gen_prompt_family, Corruption, PromptFamily, ToyModelConfig};

fn main() -> patchgraph::Result<()> {
    let model = build_toy_model(&ToyModelConfig::default())?;
    let cfg = model.config().clone();
    let mut slices = Vec::new();
    for c in [Corruption::SwapBoth, Corruption::SwapSubject] {
        let pairs = gen_prompt_family(PromptFamily::BindingTask, c, 100, cfg.tokens, cfg.vocab, 0)?;
        slices.push(build_effect_tensor(&model, SliceId::new("binding-task", c.as_str()), &pairs, None)?);
    }
    let protocol = ProtocolConfig {
        reps: vec![Rep::FixedWeighted, Rep::Wl, Rep::Coarse],
        ..ProtocolConfig::default()
    };
    let report = run_benchmark(&slices, &protocol)?;
    for r in &report.rows {
        println!("{:<16} {:<7} {:.4} ± {:.4}", r.name, r.kernel.as_str(), r.mean, r.std);
    }
    Ok(())
}
