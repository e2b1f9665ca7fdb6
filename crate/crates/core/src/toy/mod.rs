// SPDX-License-Identifier: MIT OR Apache-2.0

//! Desk-scale sources of effect tensors: a toy transformer patched through
//! hook points, and a planted-structure generator.

mod model;
mod planted;
mod prompts;

pub use model::{build_toy_model, Nonlinearity, Overrides, ToyModel, ToyModelConfig, Trace};
pub use planted::{gen_planted_tensors, PlantedConfig};
pub use prompts::{
    gen_prompt_family, surface_meta, Corruption, PromptFamily, PromptPair, COPY_TOKEN, QUERY_TOKEN,
};

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::tensor::{EffectTensor, NodeId, NodeSet, PairedEffectRecord, SliceId};

/// Where an overridden site takes its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Cached clean-run activation.
    Clean,
    /// Cached plain corrupted-run activation (pins the site).
    Corrupted,
}

/// Clean and corrupted traces of one prompt pair, computed once and reused
/// by every patched run on that pair.
#[derive(Debug)]
pub struct PatchSession<'m> {
    model: &'m ToyModel,
    pair: PromptPair,
    clean: Trace,
    corrupted: Trace,
}

impl<'m> PatchSession<'m> {
    pub fn new(model: &'m ToyModel, pair: &PromptPair) -> Result<Self> {
        if pair.target >= model.config().vocab {
            return Err(invalid(format!("target {} outside vocab", pair.target)));
        }
        let clean = model.forward(&pair.clean)?;
        let corrupted = model.forward(&pair.corrupted)?;
        Ok(Self {
            model,
            pair: pair.clone(),
            clean,
            corrupted,
        })
    }

    pub fn clean(&self) -> &Trace {
        &self.clean
    }

    pub fn corrupted(&self) -> &Trace {
        &self.corrupted
    }

    /// Observable: logit of the target token at the final position.
    pub fn observable(&self, trace: &Trace) -> f64 {
        trace.logits[self.pair.target]
    }

    /// Corrupted run with the given sites overwritten.
    pub fn run(&self, sites: &[(NodeId, Source)]) -> Result<Trace> {
        let mut ov = Overrides::new();
        for (node, src) in sites {
            if !self.model.node_set().contains(node) {
                return Err(invalid(format!("node {node} is outside the model")));
            }
            let trace = match src {
                Source::Clean => &self.clean,
                Source::Corrupted => &self.corrupted,
            };
            ov.insert(*node, trace.site(node));
        }
        self.model
            .run(&self.pair.corrupted, &ov, Some(&self.corrupted))
    }

    /// `O(corrupted with patch_set restored to clean) − O(corrupted)`.
    pub fn patch_effect(&self, patch_set: &[NodeId]) -> Result<f64> {
        if patch_set.is_empty() {
            return Ok(0.0);
        }
        let sites: Vec<(NodeId, Source)> = patch_set.iter().map(|n| (*n, Source::Clean)).collect();
        let trace = self.run(&sites)?;
        Ok(self.observable(&trace) - self.observable(&self.corrupted))
    }
}

/// Patch effect of one pair, recomputing the clean and corrupted runs.
pub fn patch_effect(model: &ToyModel, pair: &PromptPair, patch_set: &[NodeId]) -> Result<f64> {
    PatchSession::new(model, pair)?.patch_effect(patch_set)
}

/// Slice tensor of single-node effects over `nodes` (default: the residual
/// stream), one row per prompt pair, with the pairs' surface features.
pub fn build_effect_tensor(
    model: &ToyModel,
    slice: SliceId,
    pairs: &[PromptPair],
    nodes: Option<&NodeSet>,
) -> Result<EffectTensor> {
    if pairs.is_empty() {
        return Err(invalid("need at least one prompt pair"));
    }
    let cfg = model.config();
    let default_nodes;
    let nodes = match nodes {
        Some(ns) => ns,
        None => {
            default_nodes = NodeSet::residual(cfg.layers, cfg.tokens)?;
            &default_nodes
        }
    };
    if let Some(bad) = nodes.nodes().iter().find(|n| !model.node_set().contains(n)) {
        return Err(invalid(format!("node {bad} is outside the model")));
    }
    let rows = pairs
        .par_iter()
        .map(|pair| {
            let session = PatchSession::new(model, pair)?;
            nodes
                .nodes()
                .iter()
                .map(|u| session.patch_effect(&[*u]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = pairs.iter().map(|p| p.meta).collect();
    EffectTensor::new(slice, nodes.clone(), rows)?.with_meta(meta)
}

/// Joint effects `E_{u,v}` for every requested pair on every prompt.
pub fn paired_effects(
    model: &ToyModel,
    pairs: &[PromptPair],
    edges: &[(NodeId, NodeId)],
) -> Result<Vec<PairedEffectRecord>> {
    let per_example = pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let session = PatchSession::new(model, pair)?;
            edges
                .iter()
                .map(|(u, v)| {
                    Ok(PairedEffectRecord {
                        u: *u,
                        v: *v,
                        example: i,
                        joint_effect: session.patch_effect(&[*u, *v])?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_example.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ComponentType;

    fn model(nl: Nonlinearity) -> ToyModel {
        build_toy_model(&ToyModelConfig {
            nonlinearity: nl,
            ..Default::default()
        })
        .unwrap()
    }

    fn pairs(c: Corruption, n: usize) -> Vec<PromptPair> {
        gen_prompt_family(PromptFamily::BindingTask, c, n, 8, 64, 11).unwrap()
    }

    #[test]
    fn empty_patch_set_is_exactly_zero() {
        let m = model(Nonlinearity::GeluLike);
        let p = &pairs(Corruption::SwapBoth, 1)[0];
        assert_eq!(patch_effect(&m, p, &[]).unwrap(), 0.0);
    }

    #[test]
    fn readout_site_restores_the_clean_observable() {
        let m = model(Nonlinearity::GeluLike);
        for p in pairs(Corruption::SwapBoth, 5) {
            let s = PatchSession::new(&m, &p).unwrap();
            let e = s.patch_effect(&[NodeId::res(3, 8)]).unwrap();
            let want = s.observable(s.clean()) - s.observable(s.corrupted());
            assert!((e - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn identity_corruption_gives_zero_effects() {
        let m = model(Nonlinearity::GeluLike);
        let t = build_effect_tensor(&m, SliceId::new("b", "id"), &pairs(Corruption::Identity, 4), None)
            .unwrap();
        assert!((0..4).all(|i| t.row(i).iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn tensor_shape_for_gpt2_grid() {
        let m = build_toy_model(&ToyModelConfig {
            layers: 12,
            tokens: 11,
            ..Default::default()
        })
        .unwrap();
        let ps = gen_prompt_family(PromptFamily::BindingTask, Corruption::SwapOne, 8, 11, 64, 1)
            .unwrap();
        let t = build_effect_tensor(&m, SliceId::new("b", "one"), &ps, None).unwrap();
        assert_eq!((t.n_examples(), t.n_nodes()), (8, 132));
    }

    #[test]
    fn cached_clean_equals_recomputed_clean() {
        let m = model(Nonlinearity::GeluLike);
        let p = &pairs(Corruption::SwapOne, 1)[0];
        let session = PatchSession::new(&m, p).unwrap();
        let set = [NodeId::res(1, 2), NodeId::new(2, 7, ComponentType::Mlp)];
        let cached = session.patch_effect(&set).unwrap();

        let clean = m.forward(&p.clean).unwrap();
        let mut ov = Overrides::new();
        for n in &set {
            ov.insert(*n, clean.site(n));
        }
        let scratch = m.run(&p.corrupted, &ov, None).unwrap();
        let plain = m.forward(&p.corrupted).unwrap();
        assert_eq!(
            cached,
            scratch.logits[p.target] - plain.logits[p.target]
        );
    }

    #[test]
    fn patching_is_local_to_the_downstream_cone() {
        let m = model(Nonlinearity::GeluLike);
        let p = &pairs(Corruption::SwapBoth, 1)[0];
        let s = PatchSession::new(&m, p).unwrap();
        let u = NodeId::res(1, 4);
        let patched = s.run(&[(u, Source::Clean)]).unwrap();
        for node in m.node_set().nodes() {
            let downstream = node.layer > u.layer && node.token >= u.token || *node == u;
            if !downstream {
                assert_eq!(patched.site(node), s.corrupted().site(node), "{node}");
            }
        }
    }

    #[test]
    fn linear_model_effects_are_additive_on_one_layer() {
        let m = model(Nonlinearity::Linear);
        for p in pairs(Corruption::SwapBoth, 4) {
            let s = PatchSession::new(&m, &p).unwrap();
            let (u, v) = (NodeId::res(1, 1), NodeId::res(1, 7));
            let joint = s.patch_effect(&[u, v]).unwrap();
            let sum = s.patch_effect(&[u]).unwrap() + s.patch_effect(&[v]).unwrap();
            assert!((joint - sum).abs() < 1e-9, "{joint} vs {sum}");
        }
    }

    #[test]
    fn unknown_nodes_are_rejected() {
        let m = model(Nonlinearity::GeluLike);
        let p = &pairs(Corruption::SwapBoth, 1)[0];
        assert!(patch_effect(&m, p, &[NodeId::res(4, 1)]).is_err());
        assert!(patch_effect(&m, p, &[NodeId::res(0, 9)]).is_err());
    }
}
