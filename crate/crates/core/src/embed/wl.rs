// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weisfeiler–Lehman subtree histograms on signed directed graphs.
//!
//! Iteration 0 labels are node names (`res.L3.T5`). Iteration `r + 1`
//! relabels node `x` with the 16-hex-digit FNV-1a hash of
//!
//! ```text
//! <label_r(x)>|<nbr>,<sign>,<dir>;<nbr>,<sign>,<dir>;…
//! ```
//!
//! where the neighbour tuples are sorted, `sign` is `+` or `-` and `dir` is
//! `in` or `out`. Histogram keys are `"<r>:<label>"`.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::graph::PatchGraph;
use crate::hash::fnv1a64;

use super::{Embedding, Rep, Values};

pub const DEFAULT_WL_DEPTH: usize = 2;

pub(crate) fn wl_signature(label: &str, mut nbrs: Vec<(String, char, &'static str)>) -> String {
    nbrs.sort();
    let body: Vec<String> = nbrs
        .into_iter()
        .map(|(l, s, d)| format!("{l},{s},{d}"))
        .collect();
    format!("{label}|{}", body.join(";"))
}

pub fn wl_embed(g: &PatchGraph, depth: usize) -> Result<Embedding> {
    let nodes = g.nodes();
    let n = nodes.len();
    let mut labels: Vec<String> = nodes.nodes().iter().map(|x| x.name()).collect();
    let mut hist: BTreeMap<String, f64> = BTreeMap::new();
    let mut record = |r: usize, labels: &[String]| {
        for l in labels {
            *hist.entry(format!("{r}:{l}")).or_insert(0.0) += 1.0;
        }
    };
    record(0, &labels);

    let mut adj: Vec<Vec<(usize, char, &'static str)>> = vec![Vec::new(); n];
    for e in g.edges() {
        let s = if e.weight < 0.0 { '-' } else { '+' };
        adj[e.src].push((e.dst, s, "out"));
        adj[e.dst].push((e.src, s, "in"));
    }
    for r in 1..=depth {
        labels = (0..n)
            .map(|x| {
                let nbrs = adj[x]
                    .iter()
                    .map(|&(y, s, d)| (labels[y].clone(), s, d))
                    .collect();
                format!("{:016x}", fnv1a64(wl_signature(&labels[x], nbrs).as_bytes()))
            })
            .collect();
        record(r, &labels);
    }
    Ok(Embedding {
        rep: Rep::Wl,
        dim: hist.len(),
        values: Values::Sparse(hist),
        meta: BTreeMap::from([("wl_depth".to_string(), depth.to_string())]),
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::graph;
    use super::*;

    fn keys(e: &Embedding, r: usize) -> Vec<(String, f64)> {
        let p = format!("{r}:");
        e.nonzeros().into_iter().filter(|(k, _)| k.starts_with(&p)).collect()
    }

    #[test]
    fn depth_zero_has_one_bin_per_node() {
        let g = graph(3, 4, &[(0, 5, 0.1)]);
        let e = wl_embed(&g, 0).unwrap();
        assert_eq!(e.dim, 12);
        assert!(e.nonzeros().iter().all(|(_, v)| *v == 1.0));
    }

    #[test]
    fn single_edge_hand_trace() {
        // a = res.L0.T1 -> b = res.L0.T2 with weight +0.5.
        let g = graph(1, 2, &[(0, 1, 0.5)]);
        let e = wl_embed(&g, 1).unwrap();
        let la = format!("{:016x}", fnv1a64(b"res.L0.T1|res.L0.T2,+,out"));
        let lb = format!("{:016x}", fnv1a64(b"res.L0.T2|res.L0.T1,+,in"));
        let mut want = vec![(format!("1:{la}"), 1.0), (format!("1:{lb}"), 1.0)];
        want.sort_by(|x, y| x.0.cmp(&y.0));
        assert_eq!(keys(&e, 1), want);
    }

    #[test]
    fn deeper_histogram_extends_shallower() {
        let g = graph(3, 3, &[(0, 4, 0.3), (1, 4, -0.2), (4, 8, 0.9), (2, 7, 0.1)]);
        let h1 = wl_embed(&g, 1).unwrap();
        let h2 = wl_embed(&g, 2).unwrap();
        for (k, v) in h1.nonzeros() {
            assert_eq!(h2.nonzeros().iter().find(|(k2, _)| *k2 == k).unwrap().1, v);
        }
        assert!(h2.dim > h1.dim);
    }

    #[test]
    fn sign_changes_labels() {
        let pos = wl_embed(&graph(1, 2, &[(0, 1, 0.5)]), 1).unwrap();
        let neg = wl_embed(&graph(1, 2, &[(0, 1, -0.5)]), 1).unwrap();
        assert_ne!(pos, neg);
        assert_eq!(keys(&pos, 0), keys(&neg, 0));
    }
}
