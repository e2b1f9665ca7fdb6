// SPDX-License-Identifier: MIT OR Apache-2.0

//! Slot-addressed representations: fixed layout, feature hashing and coarse
//! per-layer counts.

use crate::error::{invalid, Result};
use crate::graph::PatchGraph;
use crate::hash::fnv1a64;
use crate::stats::{mean, population_std};
use crate::tensor::NodeSet;

use super::{Embedding, Rep};

pub const DEFAULT_HASH_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedVariant {
    Weighted,
    Binary,
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashVariant {
    Weighted,
    Sign,
}

/// Row-major index of ordered slot `(src, dst)`, `src ≠ dst`, among the
/// `n(n−1)` slots of an `n`-node set.
pub fn fixed_slot_index(n: usize, src: usize, dst: usize) -> usize {
    debug_assert!(src != dst && src < n && dst < n);
    src * (n - 1) + if dst < src { dst } else { dst - 1 }
}

/// Canonical slot name, e.g. `res.L0.T1->res.L1.T2`.
pub fn slot_string(nodes: &NodeSet, src: usize, dst: usize) -> String {
    format!("{}->{}", nodes.node(src), nodes.node(dst))
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn fixed_layout_embed(g: &PatchGraph, variant: FixedVariant) -> Embedding {
    let n = g.nodes().len();
    let mut v = vec![0.0; n * n.saturating_sub(1)];
    for e in g.edges() {
        v[fixed_slot_index(n, e.src, e.dst)] = match variant {
            FixedVariant::Weighted => e.weight,
            FixedVariant::Binary => 1.0,
            FixedVariant::Signed => sign(e.weight),
        };
    }
    let rep = match variant {
        FixedVariant::Weighted => Rep::FixedWeighted,
        FixedVariant::Binary => Rep::FixedBinary,
        FixedVariant::Signed => Rep::FixedSigned,
    };
    Embedding::dense(rep, v).expect("edge weights are finite")
}

/// Bucket of a slot is `fnv1a64(slot_string) mod d`; colliding slots add.
pub fn hashed_embed(g: &PatchGraph, d: usize, variant: HashVariant) -> Result<Embedding> {
    if d == 0 {
        return Err(invalid("hash dimension must be >= 1"));
    }
    let mut v = vec![0.0; d];
    for e in g.edges() {
        let bucket = (fnv1a64(slot_string(g.nodes(), e.src, e.dst).as_bytes()) % d as u64) as usize;
        v[bucket] += match variant {
            HashVariant::Weighted => e.weight,
            HashVariant::Sign => sign(e.weight),
        };
    }
    let rep = match variant {
        HashVariant::Weighted => Rep::HashedWeighted,
        HashVariant::Sign => Rep::HashedSign,
    };
    Ok(Embedding::dense(rep, v)?.with_meta("hash_dim", d))
}

const COARSE_STATS: usize = 11;

pub fn coarse_dim(layers: usize) -> usize {
    layers * 2 * 4 + COARSE_STATS
}

fn layer_gap_bucket(gap: usize) -> usize {
    match gap {
        0 => 0,
        1 => 1,
        2 | 3 => 2,
        _ => 3,
    }
}

/// Edge counts per `(source layer, sign, |Δlayer| bucket)` with buckets
/// `{0, 1, 2–3, ≥4}`, then 11 global statistics:
/// total edges, positive fraction, mean/std/max `|w|`, mean and std of the
/// out-degree, isolated nodes, reciprocal slot pairs, source layer of the
/// largest `|w|` and the layer emitting most edges.
pub fn coarse_embed(g: &PatchGraph) -> Embedding {
    let nodes = g.nodes();
    let layers = nodes.layers();
    let mut v = vec![0.0; coarse_dim(layers)];
    let mut per_layer = vec![0usize; layers];
    for e in g.edges() {
        let (a, b) = (nodes.node(e.src), nodes.node(e.dst));
        let s = usize::from(e.weight < 0.0);
        let bucket = layer_gap_bucket(a.layer.abs_diff(b.layer));
        v[(a.layer * 2 + s) * 4 + bucket] += 1.0;
        per_layer[a.layer] += 1;
    }

    let edges = g.edges();
    let stats = &mut v[layers * 8..];
    if !edges.is_empty() {
        let abs: Vec<f64> = edges.iter().map(|e| e.weight.abs()).collect();
        let out: Vec<f64> = g.out_degrees().into_iter().map(|d| d as f64).collect();
        let ins = g.in_degrees();
        let max_edge = edges
            .iter()
            .enumerate()
            .fold(0, |best, (i, e)| if e.weight.abs() > edges[best].weight.abs() { i } else { best });
        let densest = (0..layers).fold(0, |best, l| if per_layer[l] > per_layer[best] { l } else { best });
        stats[0] = edges.len() as f64;
        stats[1] = edges.iter().filter(|e| e.weight > 0.0).count() as f64 / edges.len() as f64;
        stats[2] = mean(&abs);
        stats[3] = population_std(&abs);
        stats[4] = abs.iter().cloned().fold(0.0, f64::max);
        stats[5] = mean(&out);
        stats[6] = population_std(&out);
        stats[7] = (0..nodes.len()).filter(|&i| out[i] == 0.0 && ins[i] == 0).count() as f64;
        stats[8] = edges
            .iter()
            .filter(|e| e.src < e.dst && g.weight(e.dst, e.src).is_some())
            .count() as f64;
        stats[9] = nodes.node(edges[max_edge].src).layer as f64;
        stats[10] = densest as f64;
    }
    Embedding::dense(Rep::Coarse, v).expect("finite statistics")
}

#[cfg(test)]
mod tests {
    use super::super::tests::graph;
    use super::*;

    #[test]
    fn slot_index_is_a_bijection() {
        let n = 5;
        let mut seen = vec![false; n * (n - 1)];
        for u in 0..n {
            for v in (0..n).filter(|&v| v != u) {
                let i = fixed_slot_index(n, u, v);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn one_negative_edge_in_each_fixed_variant() {
        let g = graph(2, 2, &[(1, 2, -0.3)]);
        let slot = fixed_slot_index(4, 1, 2);
        let at = |v| fixed_layout_embed(&g, v).as_dense().unwrap()[slot];
        assert_eq!(at(FixedVariant::Weighted), -0.3);
        assert_eq!(at(FixedVariant::Signed), -1.0);
        assert_eq!(at(FixedVariant::Binary), 1.0);
        let w = fixed_layout_embed(&g, FixedVariant::Weighted);
        assert_eq!(w.nonzeros().len(), 1);
    }

    #[test]
    fn empty_graph_is_zero_everywhere() {
        let g = graph(3, 2, &[]);
        for v in [FixedVariant::Weighted, FixedVariant::Binary, FixedVariant::Signed] {
            assert!(fixed_layout_embed(&g, v).nonzeros().is_empty());
        }
        for v in [HashVariant::Weighted, HashVariant::Sign] {
            assert!(hashed_embed(&g, 64, v).unwrap().nonzeros().is_empty());
        }
        let c = coarse_embed(&g);
        assert!(c.as_dense().unwrap()[..24].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn colliding_signs_cancel() {
        // With d = 1 every slot collides.
        let g = graph(2, 2, &[(0, 1, 0.7), (0, 2, -0.2)]);
        let e = hashed_embed(&g, 1, HashVariant::Sign).unwrap();
        assert_eq!(e.as_dense().unwrap(), &[0.0]);
        assert!(hashed_embed(&g, 0, HashVariant::Sign).is_err());
    }

    #[test]
    fn hash_bucket_is_documented_fnv() {
        let g = graph(2, 2, &[(0, 3, 1.0)]);
        let e = hashed_embed(&g, 1024, HashVariant::Weighted).unwrap();
        let b = (fnv1a64(b"res.L0.T1->res.L1.T2") % 1024) as usize;
        assert_eq!(e.as_dense().unwrap()[b], 1.0);
    }

    #[test]
    fn coarse_single_edge_bucket() {
        // res(2,1) -> res(3,1) on a 12 x 2 grid: node indices 4 and 6.
        let g = graph(12, 2, &[(4, 6, 0.25)]);
        let v = coarse_embed(&g);
        let v = v.as_dense().unwrap();
        assert_eq!(v.len(), 107);
        let counts = &v[..96];
        assert_eq!(counts.iter().sum::<f64>(), 1.0);
        assert_eq!(counts[(2 * 2) * 4 + 1], 1.0);
        assert_eq!(v[96], 1.0);
        assert_eq!(v[97], 1.0);
        assert_eq!(v[96 + 9], 2.0);
    }

    #[test]
    fn coarse_counts_reciprocal_slots() {
        let g = graph(2, 2, &[(0, 1, 0.5), (1, 0, 0.5), (2, 3, 0.1)]);
        let v = coarse_embed(&g);
        assert_eq!(v.as_dense().unwrap()[16 + 8], 1.0);
    }
}
