// SPDX-License-Identifier: MIT OR Apache-2.0

//! Classification benchmark on planted tensors. Pass a separation as the
//! first argument (default 3.0); 0 makes the slices exchangeable.
//!
//! `cargo run --release --example planted_benchmark -- 0`

use patchgraph::eval::{run_benchmark, ProtocolConfig};
use patchgraph::toy::{gen_planted_tensors, PlantedConfig};

fn main() -> patchgraph::Result<()> {
    let separation = std::env::args().nth(1).map_or(3.0, |s| s.parse().expect("separation"));
    let tensors = gen_planted_tensors(&PlantedConfig {
        separation,
        ..PlantedConfig::default()
    })?;
    let report = run_benchmark(&tensors, &ProtocolConfig::default())?;
    println!("slices {:?}, chance {:.2}", report.slices, report.chance);
    println!("{:<16} {:<7} {:>6} {:>7} {:>7}", "row", "kernel", "dim", "mean", "std");
    for r in &report.rows {
        println!("{:<16} {:<7} {:>6} {:>7.4} {:>7.4}", r.name, r.kernel.as_str(), r.dim, r.mean, r.std);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    Ok(())
}
