// SPDX-License-Identifier: MIT OR Apache-2.0

//! Graph representations: every [`PatchGraph`] maps to one feature vector
//! per representation family.
//!
//! | rep | dim (120 nodes, 12 layers) |
//! |-----|-----|
//! | `wl` | data dependent (sparse, keyed by label string) |
//! | `spectral` | 96 |
//! | `graphlet` | 38 |
//! | `fixed_*` | n(n−1) = 14,280 |
//! | `hashed_*` | 1,024 |
//! | `coarse` | 12·2·4 + 11 = 107 |

mod graphlet;
mod layout;
mod pca;
mod spectral;
mod wl;

pub use graphlet::{graphlet_embed, triad_census, TriadCensus, TRIAD_NAMES};
pub use layout::{
    coarse_embed, coarse_dim, fixed_layout_embed, fixed_slot_index, hashed_embed, slot_string,
    FixedVariant, HashVariant, DEFAULT_HASH_DIM,
};
pub use pca::{pca_project, PcaProjection};
pub use spectral::{normalised_laplacian, spectral_embed, SPECTRAL_DIM};
pub use wl::{wl_embed, DEFAULT_WL_DEPTH};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::PatchGraph;
use crate::tensor::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rep {
    Wl,
    Spectral,
    Graphlet,
    FixedWeighted,
    FixedBinary,
    FixedSigned,
    HashedWeighted,
    HashedSign,
    Coarse,
}

impl Rep {
    pub const ALL: [Rep; 9] = [
        Rep::Wl,
        Rep::Spectral,
        Rep::Graphlet,
        Rep::FixedWeighted,
        Rep::FixedBinary,
        Rep::FixedSigned,
        Rep::HashedWeighted,
        Rep::HashedSign,
        Rep::Coarse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rep::Wl => "wl",
            Rep::Spectral => "spectral",
            Rep::Graphlet => "graphlet",
            Rep::FixedWeighted => "fixed_weighted",
            Rep::FixedBinary => "fixed_binary",
            Rep::FixedSigned => "fixed_signed",
            Rep::HashedWeighted => "hashed_weighted",
            Rep::HashedSign => "hashed_sign",
            Rep::Coarse => "coarse",
        }
    }
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rep::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown representation {s:?}")))
    }
}

/// Representation parameters that are not implied by the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub wl_depth: usize,
    pub hash_dim: usize,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            wl_depth: DEFAULT_WL_DEPTH,
            hash_dim: DEFAULT_HASH_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Dense(Vec<f64>),
    /// Keyed by canonical feature name; absent keys are zero.
    Sparse(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub rep: Rep,
    /// Dense length, or number of stored keys for sparse values.
    pub dim: usize,
    pub values: Values,
    pub meta: BTreeMap<String, String>,
}

impl Embedding {
    pub(crate) fn dense(rep: Rep, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("{rep} embedding coordinate {i}"),
                value: values[i],
            });
        }
        Ok(Self {
            rep,
            dim: values.len(),
            values: Values::Dense(values),
            meta: BTreeMap::new(),
        })
    }

    pub(crate) fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn as_dense(&self) -> Option<&[f64]> {
        match &self.values {
            Values::Dense(v) => Some(v),
            Values::Sparse(_) => None,
        }
    }

    /// Non-zero coordinates as `(key, value)`; dense keys are indices.
    pub fn nonzeros(&self) -> Vec<(String, f64)> {
        match &self.values {
            Values::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, x)| (i.to_string(), *x))
                .collect(),
            Values::Sparse(m) => m
                .iter()
                .filter(|(_, x)| **x != 0.0)
                .map(|(k, x)| (k.clone(), *x))
                .collect(),
        }
    }
}

/// Embeds one graph under `rep`.
pub fn embed(graph: &PatchGraph, rep: Rep, params: &EmbedParams) -> Result<Embedding> {
    match rep {
        Rep::Wl => wl_embed(graph, params.wl_depth),
        Rep::Spectral => spectral_embed(graph),
        Rep::Graphlet => Ok(graphlet_embed(graph)),
        Rep::FixedWeighted => Ok(fixed_layout_embed(graph, FixedVariant::Weighted)),
        Rep::FixedBinary => Ok(fixed_layout_embed(graph, FixedVariant::Binary)),
        Rep::FixedSigned => Ok(fixed_layout_embed(graph, FixedVariant::Signed)),
        Rep::HashedWeighted => hashed_embed(graph, params.hash_dim, HashVariant::Weighted),
        Rep::HashedSign => hashed_embed(graph, params.hash_dim, HashVariant::Sign),
        Rep::Coarse => Ok(coarse_embed(graph)),
    }
}

/// Column names and row-aligned dense features for a batch of embeddings.
/// Dense inputs must share a length; sparse inputs are aligned on the sorted
/// union of their keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn feature_matrix(embs: &[Embedding]) -> Result<FeatureMatrix> {
    let Some(first) = embs.first() else {
        return Ok(FeatureMatrix {
            columns: Vec::new(),
            rows: Vec::new(),
        });
    };
    if embs.iter().any(|e| e.rep != first.rep) {
        return Err(invalid("cannot align embeddings of different representations"));
    }
    match &first.values {
        Values::Dense(v0) => {
            let d = v0.len();
            let rows = embs
                .iter()
                .map(|e| match &e.values {
                    Values::Dense(v) if v.len() == d => Ok(v.clone()),
                    Values::Dense(v) => Err(Error::Shape(format!(
                        "embedding dims differ: {d} vs {}",
                        v.len()
                    ))),
                    Values::Sparse(_) => Err(invalid("mixed dense and sparse embeddings")),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FeatureMatrix {
                columns: (0..d).map(|i| i.to_string()).collect(),
                rows,
            })
        }
        Values::Sparse(_) => {
            let mut keys = BTreeSet::new();
            for e in embs {
                match &e.values {
                    Values::Sparse(m) => keys.extend(m.keys().cloned()),
                    Values::Dense(_) => return Err(invalid("mixed dense and sparse embeddings")),
                }
            }
            let columns: Vec<String> = keys.into_iter().collect();
            let index: BTreeMap<&str, usize> =
                columns.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
            let rows = embs
                .iter()
                .map(|e| {
                    let mut row = vec![0.0; columns.len()];
                    if let Values::Sparse(m) = &e.values {
                        for (k, v) in m {
                            row[index[k.as_str()]] = *v;
                        }
                    }
                    row
                })
                .collect();
            Ok(FeatureMatrix { columns, rows })
        }
    }
}

/// Dense CSV: header `graph,<columns…>`, one row per labelled embedding.
pub fn write_embeddings_csv(path: &Path, labels: &[String], embs: &[Embedding]) -> Result<()> {
    if labels.len() != embs.len() {
        return Err(Error::Shape(format!("{} labels for {} embeddings", labels.len(), embs.len())));
    }
    let fm = feature_matrix(embs)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(std::iter::once("graph").chain(fm.columns.iter().map(String::as_str)))?;
    for (label, row) in labels.iter().zip(&fm.rows) {
        w.write_record(std::iter::once(label.clone()).chain(row.iter().map(|x| fmt_f64(*x))))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SparseJson<'a> {
    rep: Rep,
    dim: usize,
    meta: &'a BTreeMap<String, String>,
    values: BTreeMap<String, f64>,
}

/// Sparse JSON `{rep, dim, meta, values: {index: value}}` with zeros omitted.
pub fn write_embedding_json(path: &Path, emb: &Embedding) -> Result<()> {
    let doc = SparseJson {
        rep: emb.rep,
        dim: emb.dim,
        meta: &emb.meta,
        values: emb.nonzeros().into_iter().collect(),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Construction, Edge};
    use crate::tensor::{NodeSet, SliceId};

    pub(crate) fn graph(layers: usize, tokens: usize, edges: &[(usize, usize, f64)]) -> PatchGraph {
        let ns = NodeSet::residual(layers, tokens).unwrap();
        let edges = edges
            .iter()
            .map(|&(src, dst, weight)| Edge { src, dst, weight })
            .collect();
        PatchGraph::new(ns, edges, Construction::CoInfluence, SliceId::new("t", "t"), 5, false).unwrap()
    }

    #[test]
    fn gpt2_shaped_dims() {
        let g = graph(12, 10, &[(0, 15, 0.4), (3, 40, -0.2)]);
        let p = EmbedParams::default();
        let dims: Vec<(Rep, usize)> = [
            Rep::FixedWeighted,
            Rep::HashedWeighted,
            Rep::Spectral,
            Rep::Graphlet,
            Rep::Coarse,
        ]
        .into_iter()
        .map(|r| (r, embed(&g, r, &p).unwrap().dim))
        .collect();
        assert_eq!(
            dims,
            vec![
                (Rep::FixedWeighted, 14_280),
                (Rep::HashedWeighted, 1_024),
                (Rep::Spectral, 96),
                (Rep::Graphlet, 38),
                (Rep::Coarse, 107)
            ]
        );
    }

    #[test]
    fn rep_names_round_trip() {
        for r in Rep::ALL {
            assert_eq!(r.as_str().parse::<Rep>().unwrap(), r);
        }
    }

    #[test]
    fn sparse_alignment_uses_key_union() {
        let mk = |pairs: &[(&str, f64)]| Embedding {
            rep: Rep::Wl,
            dim: pairs.len(),
            values: Values::Sparse(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()),
            meta: BTreeMap::new(),
        };
        let fm = feature_matrix(&[mk(&[("b", 1.0)]), mk(&[("a", 2.0), ("b", 3.0)])]).unwrap();
        assert_eq!(fm.columns, vec!["a", "b"]);
        assert_eq!(fm.rows, vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
    }

    #[test]
    fn mismatched_dense_dims_error() {
        let a = Embedding::dense(Rep::Coarse, vec![1.0]).unwrap();
        let b = Embedding::dense(Rep::Coarse, vec![1.0, 2.0]).unwrap();
        assert!(matches!(feature_matrix(&[a, b]), Err(Error::Shape(_))));
    }

    #[test]
    fn csv_and_json_export() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(2, 2, &[(0, 3, 0.5)]);
        let e = fixed_layout_embed(&g, FixedVariant::Weighted);
        write_embeddings_csv(&dir.path().join("e.csv"), &["g0".into()], std::slice::from_ref(&e)).unwrap();
        let text = fs::read_to_string(dir.path().join("e.csv")).unwrap();
        assert!(text.starts_with("graph,0,1,"));
        write_embedding_json(&dir.path().join("e.json"), &e).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("e.json")).unwrap()).unwrap();
        assert_eq!(v["values"]["2"], 0.5);
        assert_eq!(v["dim"], 12);
    }
}
