// SPDX-License-Identifier: MIT OR Apache-2.0

//! Directed triad census (Batagelj–Mrvar) with per-class mean edge weight.

use crate::graph::PatchGraph;
use crate::stats::mean;

use super::{Embedding, Rep};

pub const TRIAD_NAMES: [&str; 16] = [
    "003", "012", "102", "021D", "021U", "021C", "111D", "111U", "030T", "030C", "201", "120D",
    "120U", "120C", "210", "300",
];

/// Tricode (6-bit adjacency code of an ordered triple) to triad class.
const TRITYPES: [u8; 64] = [
    0, 1, 1, 2, 1, 3, 5, 7, 1, 5, 4, 6, 2, 7, 6, 10, 1, 5, 3, 7, 4, 8, 8, 12, 5, 9, 8, 13, 6, 13,
    11, 14, 1, 4, 5, 6, 5, 8, 9, 13, 3, 8, 8, 11, 7, 12, 13, 14, 2, 6, 7, 10, 6, 11, 13, 14, 7, 13,
    12, 14, 10, 14, 14, 15,
];

#[derive(Debug, Clone, PartialEq)]
pub struct TriadCensus {
    pub counts: [u64; 16],
    /// Mean over triads of each class of the triad's mean `|w|`.
    pub mean_abs_weight: [f64; 16],
}

struct Adjacency {
    n: usize,
    w: Vec<f64>,
    present: Vec<bool>,
    nbrs: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(g: &PatchGraph) -> Self {
        let n = g.nodes().len();
        let mut w = vec![0.0; n * n];
        let mut present = vec![false; n * n];
        let mut nbrs = vec![Vec::new(); n];
        for e in g.edges() {
            w[e.src * n + e.dst] = e.weight.abs();
            present[e.src * n + e.dst] = true;
            if !present[e.dst * n + e.src] {
                nbrs[e.src].push(e.dst);
                nbrs[e.dst].push(e.src);
            }
        }
        for list in &mut nbrs {
            list.sort_unstable();
        }
        Self { n, w, present, nbrs }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.present[a * self.n + b]
    }

    fn linked(&self, a: usize, b: usize) -> bool {
        self.has(a, b) || self.has(b, a)
    }

    fn tricode(&self, v: usize, u: usize, w: usize) -> usize {
        usize::from(self.has(v, u))
            | usize::from(self.has(u, v)) << 1
            | usize::from(self.has(v, w)) << 2
            | usize::from(self.has(w, v)) << 3
            | usize::from(self.has(u, w)) << 4
            | usize::from(self.has(w, u)) << 5
    }

    fn mean_weight(&self, nodes: &[usize]) -> f64 {
        let mut sum = 0.0;
        let mut k = 0;
        for &a in nodes {
            for &b in nodes {
                if a != b && self.has(a, b) {
                    sum += self.w[a * self.n + b];
                    k += 1;
                }
            }
        }
        if k == 0 {
            0.0
        } else {
            sum / k as f64
        }
    }
}

pub fn triad_census(g: &PatchGraph) -> TriadCensus {
    let adj = Adjacency::new(g);
    let n = adj.n as u64;
    let mut counts = [0u64; 16];
    let mut wsum = [0.0; 16];
    let mut seen = vec![false; adj.n];

    for v in 0..adj.n {
        for &u in adj.nbrs[v].iter().filter(|&&u| u > v) {
            let mut s: Vec<usize> = Vec::new();
            seen[u] = true;
            seen[v] = true;
            for &w in adj.nbrs[u].iter().chain(&adj.nbrs[v]) {
                if !seen[w] {
                    seen[w] = true;
                    s.push(w);
                }
            }
            for &w in &s {
                if u < w || (v < w && w < u && !adj.linked(v, w)) {
                    let class = TRITYPES[adj.tricode(v, u, w)] as usize;
                    counts[class] += 1;
                    wsum[class] += adj.mean_weight(&[v, u, w]);
                }
            }
            let dyadic = n - s.len() as u64 - 2;
            let class = if adj.has(u, v) && adj.has(v, u) { 2 } else { 1 };
            counts[class] += dyadic;
            wsum[class] += dyadic as f64 * adj.mean_weight(&[u, v]);
            seen[u] = false;
            seen[v] = false;
            for w in s {
                seen[w] = false;
            }
        }
    }
    let total = if n >= 3 { n * (n - 1) * (n - 2) / 6 } else { 0 };
    counts[0] = total - counts[1..].iter().sum::<u64>();
    let mut mean_abs_weight = [0.0; 16];
    for c in 1..16 {
        if counts[c] > 0 {
            mean_abs_weight[c] = wsum[c] / counts[c] as f64;
        }
    }
    TriadCensus {
        counts,
        mean_abs_weight,
    }
}

/// 16 census counts, 16 per-class mean `|w|`, then edge count, positive
/// fraction, mean `|w|`, max out-degree, max in-degree and the number of
/// nodes touching an edge.
pub fn graphlet_embed(g: &PatchGraph) -> Embedding {
    let census = triad_census(g);
    let mut v: Vec<f64> = census.counts.iter().map(|c| *c as f64).collect();
    v.extend_from_slice(&census.mean_abs_weight);
    let edges = g.edges();
    let out = g.out_degrees();
    let ins = g.in_degrees();
    let abs: Vec<f64> = edges.iter().map(|e| e.weight.abs()).collect();
    v.push(edges.len() as f64);
    v.push(if edges.is_empty() {
        0.0
    } else {
        edges.iter().filter(|e| e.weight > 0.0).count() as f64 / edges.len() as f64
    });
    v.push(mean(&abs));
    v.push(out.iter().copied().max().unwrap_or(0) as f64);
    v.push(ins.iter().copied().max().unwrap_or(0) as f64);
    v.push((0..out.len()).filter(|&i| out[i] + ins[i] > 0).count() as f64);
    Embedding::dense(Rep::Graphlet, v).expect("finite census")
}

#[cfg(test)]
mod tests {
    use super::super::tests::graph;
    use super::*;

    /// Representative edge sets on nodes a = 0, b = 1, c = 2, one per class
    /// in `TRIAD_NAMES` order.
    const REPRESENTATIVES: [&[(usize, usize)]; 16] = [
        &[],
        &[(0, 1)],
        &[(0, 1), (1, 0)],
        &[(1, 0), (1, 2)],
        &[(0, 1), (2, 1)],
        &[(0, 1), (1, 2)],
        &[(0, 2), (2, 0), (1, 2)],
        &[(0, 2), (2, 0), (2, 1)],
        &[(0, 1), (2, 1), (0, 2)],
        &[(1, 0), (2, 1), (0, 2)],
        &[(0, 1), (1, 0), (0, 2), (2, 0)],
        &[(1, 2), (1, 0), (0, 2), (2, 0)],
        &[(0, 1), (2, 1), (0, 2), (2, 0)],
        &[(0, 1), (1, 2), (0, 2), (2, 0)],
        &[(0, 1), (1, 2), (2, 1), (0, 2), (2, 0)],
        &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)],
    ];

    fn code(adj: &[[bool; 3]; 3], p: [usize; 3]) -> u32 {
        let mut c = 0;
        for i in 0..3 {
            for j in 0..3 {
                c = c << 1 | u32::from(adj[p[i]][p[j]]);
            }
        }
        c
    }

    /// Canonical code: minimum adjacency code over all relabellings.
    fn canonical(adj: &[[bool; 3]; 3]) -> u32 {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        PERMS.iter().map(|p| code(adj, *p)).min().unwrap()
    }

    fn brute_force(edges: &[(usize, usize, f64)], n: usize) -> [u64; 16] {
        let classes: Vec<u32> = REPRESENTATIVES
            .iter()
            .map(|es| {
                let mut a = [[false; 3]; 3];
                for &(x, y) in *es {
                    a[x][y] = true;
                }
                canonical(&a)
            })
            .collect();
        let mut counts = [0; 16];
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let ids = [i, j, k];
                    let mut a = [[false; 3]; 3];
                    for &(s, d, _) in edges {
                        if let (Some(x), Some(y)) =
                            (ids.iter().position(|&q| q == s), ids.iter().position(|&q| q == d))
                        {
                            a[x][y] = true;
                        }
                    }
                    let c = canonical(&a);
                    counts[classes.iter().position(|&q| q == c).unwrap()] += 1;
                }
            }
        }
        counts
    }

    #[test]
    fn representatives_are_pairwise_non_isomorphic() {
        let mut codes: Vec<u32> = REPRESENTATIVES
            .iter()
            .map(|es| {
                let mut a = [[false; 3]; 3];
                for &(x, y) in *es {
                    a[x][y] = true;
                }
                canonical(&a)
            })
            .collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), 16);
    }

    #[test]
    fn each_representative_lands_in_its_class() {
        for (class, es) in REPRESENTATIVES.iter().enumerate() {
            let edges: Vec<(usize, usize, f64)> = es.iter().map(|&(a, b)| (a, b, 0.5)).collect();
            let c = triad_census(&graph(1, 3, &edges));
            let mut want = [0; 16];
            want[class] = 1;
            assert_eq!(c.counts, want, "{}", TRIAD_NAMES[class]);
        }
    }

    #[test]
    fn empty_graph_is_all_null_triads() {
        let n = 7;
        let c = triad_census(&graph(1, n, &[]));
        assert_eq!(c.counts[0], (n * (n - 1) * (n - 2) / 6) as u64);
        assert_eq!(c.counts[1..].iter().sum::<u64>(), 0);
    }

    #[test]
    fn single_edge_populates_only_asymmetric_dyads() {
        let c = triad_census(&graph(1, 3, &[(0, 2, -0.4)]));
        assert_eq!(c.counts[1], 1);
        assert_eq!(c.counts.iter().sum::<u64>(), 1);
        assert!((c.mean_abs_weight[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn cyclic_triangle() {
        let c = triad_census(&graph(1, 3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]));
        assert_eq!(c.counts[9], 1);
    }

    #[test]
    fn matches_brute_force_on_pseudo_random_graphs() {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(5, &[]);
        for _ in 0..20 {
            let n = 9;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random::<f64>() < 0.2 {
                        edges.push((u, v, rng.random_range(-1.0..1.0)));
                    }
                }
            }
            let got = triad_census(&graph(1, n, &edges)).counts;
            assert_eq!(got, brute_force(&edges, n));
        }
    }

    #[test]
    fn embedding_layout() {
        let g = graph(1, 4, &[(0, 1, 0.5), (1, 2, -0.5)]);
        let v = graphlet_embed(&g);
        let v = v.as_dense().unwrap();
        assert_eq!(v.len(), 38);
        assert_eq!(&v[32..], &[2.0, 0.5, 0.5, 1.0, 1.0, 3.0]);
    }
}
