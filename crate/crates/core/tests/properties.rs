// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;

use patchgraph::embed::{embed, EmbedParams, Rep};
use patchgraph::eval::{bootstrap_draws, edge_shuffle, split_examples, weight_shuffle};
use patchgraph::graph::{build_ci, build_pc, read_graph, sparsify_topk, write_graph, Ridge};
use patchgraph::kernel::{linear_kernel, rbf_kernel};
use patchgraph::screened::bh_fdr;
use patchgraph::tensor::{read_effect_tensor, write_effect_tensor, EffectTensor, NodeSet, SliceId};

fn tensor_strategy() -> impl Strategy<Value = EffectTensor> {
    (1usize..=3, 2usize..=4, 3usize..=12).prop_flat_map(|(layers, tokens, n_ex)| {
        let n = layers * tokens;
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, n), n_ex).prop_map(move |rows| {
            EffectTensor::new(SliceId::new("prop", "x"), NodeSet::residual(layers, tokens).unwrap(), rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_io_round_trips(t in tensor_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        write_effect_tensor(&t, dir.path()).unwrap();
        prop_assert_eq!(read_effect_tensor(dir.path()).unwrap(), t);
    }

    #[test]
    fn topk_respects_degree_and_precedence(t in tensor_strategy(), k in 1usize..6) {
        let w = build_ci(&t).unwrap();
        let g = sparsify_topk(&w, k, true).unwrap();
        prop_assert!(g.out_degrees().iter().all(|&d| d <= k));
        for e in g.edges() {
            prop_assert!(e.src < e.dst);
            prop_assert!(e.weight != 0.0);
            prop_assert_eq!(Some(e.weight), w.get(e.src, e.dst));
            // nothing dropped from the same source beats a kept edge
            let floor = g.edges().iter().filter(|f| f.src == e.src).map(|f| f.weight.abs()).fold(f64::INFINITY, f64::min);
            let kept = g.out_degrees()[e.src];
            if kept == k {
                for v in e.src + 1..t.n_nodes() {
                    if g.weight(e.src, v).is_none() {
                        prop_assert!(w.get(e.src, v).unwrap_or(0.0).abs() <= floor);
                    }
                }
            }
        }
    }

    #[test]
    fn graph_io_round_trips(t in tensor_strategy(), k in 1usize..4) {
        let g = sparsify_topk(&build_pc(&t, Ridge::Auto).unwrap(), k, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_graph(&g, dir.path(), "g", None).unwrap();
        prop_assert_eq!(read_graph(dir.path(), "g").unwrap(), g);
    }

    #[test]
    fn ci_weights_are_bounded_correlations(t in tensor_strategy()) {
        let w = build_ci(&t).unwrap();
        for u in 0..t.n_nodes() {
            for v in 0..t.n_nodes() {
                if let Some(x) = w.get(u, v) {
                    prop_assert!(x.is_finite() && x.abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn shuffles_preserve_what_they_should(t in tensor_strategy(), seed in any::<u64>()) {
        let g = sparsify_topk(&build_ci(&t).unwrap(), 3, true).unwrap();
        let sorted = |ws: Vec<f64>| { let mut ws = ws; ws.sort_by(f64::total_cmp); ws };
        let es = edge_shuffle(&g, seed).unwrap();
        prop_assert_eq!(es.n_edges(), g.n_edges());
        prop_assert_eq!(es.out_degrees(), g.out_degrees());
        prop_assert!(es.edges().iter().all(|e| e.src < e.dst));
        let ws = weight_shuffle(&g, seed).unwrap();
        let slots = |h: &patchgraph::graph::PatchGraph| h.edges().iter().map(|e| (e.src, e.dst)).collect::<Vec<_>>();
        prop_assert_eq!(slots(&ws), slots(&g));
        prop_assert_eq!(
            sorted(ws.edges().iter().map(|e| e.weight).collect()),
            sorted(g.edges().iter().map(|e| e.weight).collect())
        );
    }

    #[test]
    fn split_is_a_disjoint_cover(n in 2usize..200, seed in any::<u64>()) {
        let (train, test) = split_examples(n, seed).unwrap();
        prop_assert_eq!(train.len(), n.div_ceil(2));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let draws = bootstrap_draws(&train, 4, 0.75, seed).unwrap();
        prop_assert!(draws.iter().flatten().all(|i| train.binary_search(i).is_ok()));
    }

    #[test]
    fn bh_rejections_are_downward_closed(p in prop::collection::vec(0.0f64..=1.0, 1..60), alpha in 0.001f64..0.5) {
        let r = bh_fdr(&p, alpha);
        for i in 0..p.len() {
            for j in 0..p.len() {
                if r[i] && p[j] <= p[i] {
                    prop_assert!(r[j]);
                }
            }
        }
        let looser = bh_fdr(&p, (alpha * 2.0).min(1.0));
        prop_assert!(r.iter().zip(&looser).all(|(a, b)| !a || *b));
    }

    #[test]
    fn kernels_are_symmetric_with_unit_rbf_diagonal(
        xs in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 5), 2..20)
    ) {
        let lin = linear_kernel(&xs).unwrap();
        prop_assert_eq!(lin.matrix.asymmetry(), 0.0);
        let rbf = rbf_kernel(&xs, Some(0.3)).unwrap();
        prop_assert_eq!(rbf.matrix.asymmetry(), 0.0);
        prop_assert!((0..rbf.n()).all(|i| rbf.get(i, i) == 1.0));
        prop_assert!(rbf.min_eigenvalue().unwrap() >= -1e-8);
    }

    #[test]
    fn embeddings_are_deterministic_and_finite(t in tensor_strategy()) {
        let g = sparsify_topk(&build_ci(&t).unwrap(), 2, true).unwrap();
        let params = EmbedParams::default();
        for rep in Rep::ALL {
            let a = embed(&g, rep, &params).unwrap();
            prop_assert_eq!(&a, &embed(&g, rep, &params).unwrap());
            if let Some(d) = a.as_dense() {
                prop_assert!(d.iter().all(|x| x.is_finite()));
            }
        }
    }
}
