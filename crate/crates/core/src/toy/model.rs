// SPDX-License-Identifier: MIT OR Apache-2.0

//! A small seeded decoder-only transformer with hook points at every
//! `(layer, token, att | mlp | res)` site.
//!
//! Blocks are pre-norm: `mid = x + Attn(LN(x))`, `out = mid + MLP(LN(mid))`.
//! In [`Nonlinearity::Linear`] mode normalisation and the MLP activation are
//! the identity and attention scores come from a fixed positional bias, so
//! the map from any residual site to the observable is affine.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::rng_for;
use crate::tensor::{ComponentType, NodeId, NodeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    Linear,
    GeluLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyModelConfig {
    pub layers: usize,
    pub tokens: usize,
    pub d_model: usize,
    pub heads: usize,
    pub vocab: usize,
    pub seed: u64,
    pub nonlinearity: Nonlinearity,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self {
            layers: 4,
            tokens: 8,
            d_model: 16,
            heads: 2,
            vocab: 64,
            seed: 0,
            nonlinearity: Nonlinearity::GeluLike,
        }
    }
}

impl ToyModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0
            || self.tokens == 0
            || self.d_model == 0
            || self.heads == 0
            || self.vocab == 0
        {
            return Err(invalid("toy model dimensions must all be >= 1"));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(invalid(format!(
                "d_model {} not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }
}

/// Row-major `rows × cols` weight matrix.
#[derive(Debug, Clone)]
struct Weight {
    cols: usize,
    data: Vec<f64>,
}

impl Weight {
    fn random(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Self { cols, data }
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    fn row(&self, r: usize) -> &[f64] {
        debug_assert!((r + 1) * self.cols <= self.data.len());
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone)]
struct Block {
    w_q: Weight,
    w_k: Weight,
    w_v: Weight,
    w_o: Weight,
    /// `heads × T × T` score bias used in linear mode.
    pos_bias: Vec<f64>,
    w_in: Weight,
    w_out: Weight,
}

/// Activations of one forward pass, indexed `[layer][position]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub att: Vec<Vec<Vec<f64>>>,
    pub mlp: Vec<Vec<Vec<f64>>>,
    pub res: Vec<Vec<Vec<f64>>>,
    /// Logits at the final position.
    pub logits: Vec<f64>,
}

impl Trace {
    /// Activation vector at a hook site.
    pub fn site(&self, node: &NodeId) -> &[f64] {
        let pos = node.token - 1;
        match node.ctype {
            ComponentType::Att => &self.att[node.layer][pos],
            ComponentType::Mlp => &self.mlp[node.layer][pos],
            ComponentType::Res => &self.res[node.layer][pos],
        }
    }
}

/// Values written into hook sites during a forward pass.
pub type Overrides<'a> = HashMap<NodeId, &'a [f64]>;

/// Frozen toy transformer. Weights are drawn once from the config seed.
#[derive(Debug, Clone)]
pub struct ToyModel {
    config: ToyModelConfig,
    tok_emb: Weight,
    pos_emb: Weight,
    blocks: Vec<Block>,
    unembed: Weight,
    nodes: NodeSet,
}

const LN_EPS: f64 = 1e-5;

pub fn build_toy_model(config: &ToyModelConfig) -> Result<ToyModel> {
    ToyModel::new(config.clone())
}

impl ToyModel {
    pub fn new(config: ToyModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(config.seed, &[0x746f_795f_6d6f_6465]);
        let d = config.d_model;
        let t = config.tokens;
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let tok_emb = Weight::random(&mut rng, config.vocab, d, 1.0);
        let pos_emb = Weight::random(&mut rng, t, d, 1.0);
        let blocks = (0..config.layers)
            .map(|_| Block {
                w_q: Weight::random(&mut rng, d, d, inv_sqrt_d),
                w_k: Weight::random(&mut rng, d, d, inv_sqrt_d),
                w_v: Weight::random(&mut rng, d, d, inv_sqrt_d),
                w_o: Weight::random(&mut rng, d, d, inv_sqrt_d),
                pos_bias: (0..config.heads * t * t)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect(),
                w_in: Weight::random(&mut rng, 4 * d, d, inv_sqrt_d),
                w_out: Weight::random(&mut rng, d, 4 * d, 0.5 / (d as f64).sqrt()),
            })
            .collect();
        let unembed = Weight::random(&mut rng, config.vocab, d, inv_sqrt_d);
        let nodes = NodeSet::new(
            config.layers,
            config.tokens,
            &[ComponentType::Att, ComponentType::Mlp, ComponentType::Res],
        )?;
        Ok(Self {
            config,
            tok_emb,
            pos_emb,
            blocks,
            unembed,
            nodes,
        })
    }

    pub fn config(&self) -> &ToyModelConfig {
        &self.config
    }

    /// Every hook site of the model (all three component types).
    pub fn node_set(&self) -> &NodeSet {
        &self.nodes
    }

    fn linear(&self) -> bool {
        self.config.nonlinearity == Nonlinearity::Linear
    }

    fn embed(&self, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
        if tokens.len() != self.config.tokens {
            return Err(invalid(format!(
                "prompt length {} != model context {}",
                tokens.len(),
                self.config.tokens
            )));
        }
        tokens
            .iter()
            .enumerate()
            .map(|(p, &tok)| {
                if tok >= self.config.vocab {
                    return Err(invalid(format!("token id {tok} outside vocab")));
                }
                Ok(self
                    .tok_emb
                    .row(tok)
                    .iter()
                    .zip(self.pos_emb.row(p))
                    .map(|(a, b)| a + b)
                    .collect())
            })
            .collect()
    }

    fn norm(&self, x: &[f64]) -> Vec<f64> {
        if self.linear() {
            return x.to_vec();
        }
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        x.iter().map(|v| (v - m) * inv).collect()
    }

    fn activation(&self, x: f64) -> f64 {
        if self.linear() {
            x
        } else {
            let c = (2.0 / std::f64::consts::PI).sqrt();
            0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
        }
    }

    fn attention(&self, block: &Block, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let t = xs.len();
        let h = self.config.heads;
        let dh = self.config.d_model / h;
        let normed: Vec<Vec<f64>> = xs.iter().map(|x| self.norm(x)).collect();
        let q: Vec<Vec<f64>> = normed.iter().map(|x| block.w_q.matvec(x)).collect();
        let k: Vec<Vec<f64>> = normed.iter().map(|x| block.w_k.matvec(x)).collect();
        let v: Vec<Vec<f64>> = normed.iter().map(|x| block.w_v.matvec(x)).collect();
        let scale = 1.0 / (dh as f64).sqrt();
        let tt = self.config.tokens;
        (0..t)
            .map(|i| {
                let mut concat = vec![0.0; self.config.d_model];
                for head in 0..h {
                    let span = head * dh..(head + 1) * dh;
                    let scores: Vec<f64> = (0..=i)
                        .map(|j| {
                            if self.linear() {
                                block.pos_bias[(head * tt + i) * tt + j]
                            } else {
                                q[i][span.clone()]
                                    .iter()
                                    .zip(&k[j][span.clone()])
                                    .map(|(a, b)| a * b)
                                    .sum::<f64>()
                                    * scale
                            }
                        })
                        .collect();
                    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    for (j, e) in exps.iter().enumerate() {
                        let a = e / z;
                        for (c, vv) in concat[span.clone()].iter_mut().zip(&v[j][span.clone()]) {
                            *c += a * vv;
                        }
                    }
                }
                block.w_o.matvec(&concat)
            })
            .collect()
    }

    fn mlp(&self, block: &Block, x: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = block
            .w_in
            .matvec(&self.norm(x))
            .into_iter()
            .map(|h| self.activation(h))
            .collect();
        block.w_out.matvec(&hidden)
    }

    fn readout(&self, x: &[f64]) -> Vec<f64> {
        self.unembed.matvec(&self.norm(x))
    }

    /// Plain forward pass.
    pub fn forward(&self, tokens: &[usize]) -> Result<Trace> {
        self.run(tokens, &Overrides::new(), None)
    }

    /// Forward pass writing `overrides` into their hook sites. When `base` is
    /// the unpatched trace of the same tokens, layers below the first patched
    /// layer are copied from it instead of being recomputed; the result is
    /// bit-identical either way.
    pub fn run(&self, tokens: &[usize], overrides: &Overrides<'_>, base: Option<&Trace>) -> Result<Trace> {
        for node in overrides.keys() {
            if !self.nodes.contains(node) {
                return Err(invalid(format!("node {node} is outside the model")));
            }
        }
        let start = match base {
            Some(_) => overrides.keys().map(|n| n.layer).min().unwrap_or(self.config.layers),
            None => 0,
        };
        let layers = self.config.layers;
        let (mut att, mut mlp, mut res) = match base {
            Some(b) => (
                b.att[..start].to_vec(),
                b.mlp[..start].to_vec(),
                b.res[..start].to_vec(),
            ),
            None => (Vec::new(), Vec::new(), Vec::new()),
        };
        let mut x = if start == 0 {
            self.embed(tokens)?
        } else {
            res[start - 1].clone()
        };
        for layer in start..layers {
            let block = &self.blocks[layer];
            let mut a = self.attention(block, &x);
            apply(&mut a, layer, ComponentType::Att, overrides);
            let mid: Vec<Vec<f64>> = x
                .iter()
                .zip(&a)
                .map(|(xi, ai)| xi.iter().zip(ai).map(|(p, q)| p + q).collect())
                .collect();
            let mut m: Vec<Vec<f64>> = mid.iter().map(|mi| self.mlp(block, mi)).collect();
            apply(&mut m, layer, ComponentType::Mlp, overrides);
            let mut out: Vec<Vec<f64>> = mid
                .iter()
                .zip(&m)
                .map(|(p, q)| p.iter().zip(q).map(|(a, b)| a + b).collect())
                .collect();
            apply(&mut out, layer, ComponentType::Res, overrides);
            x = out.clone();
            att.push(a);
            mlp.push(m);
            res.push(out);
        }
        let logits = self.readout(&x[x.len() - 1]);
        Ok(Trace {
            att,
            mlp,
            res,
            logits,
        })
    }

    /// Final residual stream of a forward pass that starts from the given
    /// initial residual stream instead of token embeddings.
    #[cfg(test)]
    pub(crate) fn final_residual_from(&self, initial: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let mut x = initial;
        for block in &self.blocks {
            let a = self.attention(block, &x);
            let mid: Vec<Vec<f64>> = x
                .iter()
                .zip(&a)
                .map(|(xi, ai)| xi.iter().zip(ai).map(|(p, q)| p + q).collect())
                .collect();
            x = mid
                .iter()
                .map(|mi| {
                    let m = self.mlp(block, mi);
                    mi.iter().zip(&m).map(|(p, q)| p + q).collect()
                })
                .collect();
        }
        x
    }
}

fn apply(acts: &mut [Vec<f64>], layer: usize, ctype: ComponentType, overrides: &Overrides<'_>) {
    for (node, value) in overrides {
        if node.layer == layer && node.ctype == ctype {
            acts[node.token - 1].copy_from_slice(value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(cfg: &ToyModelConfig) -> Vec<usize> {
        (0..cfg.tokens).map(|i| (3 * i + 5) % cfg.vocab).collect()
    }

    #[test]
    fn same_config_is_bitwise_deterministic() {
        let cfg = ToyModelConfig::default();
        let a = build_toy_model(&cfg).unwrap();
        let b = build_toy_model(&cfg).unwrap();
        let p = prompt(&cfg);
        assert_eq!(a.forward(&p).unwrap(), b.forward(&p).unwrap());
    }

    #[test]
    fn forward_returns_vocab_logits() {
        let cfg = ToyModelConfig {
            layers: 2,
            tokens: 4,
            d_model: 16,
            heads: 2,
            ..Default::default()
        };
        let m = build_toy_model(&cfg).unwrap();
        let tr = m.forward(&prompt(&cfg)).unwrap();
        assert_eq!(tr.logits.len(), cfg.vocab);
        assert_eq!(tr.res.len(), 2);
        assert_eq!(tr.res[0].len(), 4);
    }

    #[test]
    fn linear_model_maps_zero_input_to_zero() {
        let cfg = ToyModelConfig {
            nonlinearity: Nonlinearity::Linear,
            ..Default::default()
        };
        let m = build_toy_model(&cfg).unwrap();
        let zero = vec![vec![0.0; cfg.d_model]; cfg.tokens];
        let out = m.final_residual_from(zero);
        assert!(out.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn invalid_configs() {
        let cfg = ToyModelConfig {
            d_model: 15,
            heads: 2,
            ..Default::default()
        };
        assert!(build_toy_model(&cfg).is_err());
        let m = build_toy_model(&ToyModelConfig::default()).unwrap();
        assert!(m.forward(&[1, 2, 3]).is_err());
        assert!(m.forward(&[99; 8]).is_err());
    }

    #[test]
    fn base_trace_shortcut_is_bit_identical() {
        let cfg = ToyModelConfig::default();
        let m = build_toy_model(&cfg).unwrap();
        let p = prompt(&cfg);
        let base = m.forward(&p).unwrap();
        let value = vec![0.3; cfg.d_model];
        let mut ov = Overrides::new();
        ov.insert(NodeId::res(2, 3), value.as_slice());
        let full = m.run(&p, &ov, None).unwrap();
        let fast = m.run(&p, &ov, Some(&base)).unwrap();
        assert_eq!(full, fast);
    }
}
