// SPDX-License-Identifier: MIT OR Apache-2.0

//! Staged study over toy-model slices, the same run the `patchgraph run-all`
//! command performs. Rerunning skips stages whose config hash matches.
//!
//! `cargo run --release --example pipeline -- out_dir`

use std::path::PathBuf;

use patchgraph::pipeline::{Pipeline, SourceConfig, StudyConfig, ToySource};

fn main() -> patchgraph::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("patchgraph-study"), PathBuf::from);
    let mut config = StudyConfig {
        seed: 1,
        source: SourceConfig::Toy(ToySource {
            n_examples: 60,
            ..ToySource::default()
        }),
        ..StudyConfig::default()
    };
    config.protocol.seeds = vec![7, 42];
    config.protocol.n_boot_train = 16;
    config.protocol.n_boot_test = 16;
    config.screen.params.n_edges = 20;

    let pipeline = Pipeline::new(config, &out, false)?;
    println!("config hash {}", pipeline.config_hash());
    for (stage, outcome) in pipeline.run_all()? {
        println!("  {stage:<8} {outcome:?}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("bench/report.json"))?)?;
    println!("chance {} over slices {}", report["chance"], report["slices"]);
    println!("artifacts under {}", out.display());
    Ok(())
}
