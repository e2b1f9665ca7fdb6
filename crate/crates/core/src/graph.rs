// SPDX-License-Identifier: MIT OR Apache-2.0

//! Patch-effect graph construction: co-influence (CI), partial correlation
//! (PC) and direct influence (DI) weights, precedence constraint and top-k
//! sparsification.
//!
//! Graph files are an edge list `src,dst,weight` (canonical node names,
//! canonical edge order) plus a JSON sidecar with the construction, slice,
//! `k`, constraint flag and node grid.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_pinv, SquareMatrix};
use crate::tensor::{fmt_f64, ComponentType, EffectTensor, NodeId, NodeSet, PairedEffectRecord, SliceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Construction {
    #[serde(rename = "CI")]
    CoInfluence,
    #[serde(rename = "PC")]
    PartialCorrelation,
    #[serde(rename = "DI")]
    DirectInfluence,
}

impl Construction {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CoInfluence => "CI",
            Self::PartialCorrelation => "PC",
            Self::DirectInfluence => "DI",
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CI" => Ok(Self::CoInfluence),
            "PC" => Ok(Self::PartialCorrelation),
            "DI" => Ok(Self::DirectInfluence),
            _ => Err(invalid(format!("unknown construction {s:?}"))),
        }
    }
}

/// Strict precedence: lexicographic on `(layer, token, type rank)`.
pub fn precedes(u: &NodeId, v: &NodeId) -> bool {
    u < v
}

/// Candidate edge weights before sparsification. Slots without a value are
/// absent (DI maps cover only the supplied pairs).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    nodes: NodeSet,
    slice: SliceId,
    construction: Construction,
    weights: Vec<Option<f64>>,
}

impl WeightMap {
    fn empty(nodes: &NodeSet, slice: &SliceId, construction: Construction) -> Self {
        let n = nodes.len();
        Self {
            nodes: nodes.clone(),
            slice: slice.clone(),
            construction,
            weights: vec![None; n * n],
        }
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Weight of slot `src → dst` by node index.
    pub fn get(&self, src: usize, dst: usize) -> Option<f64> {
        self.weights[src * self.nodes.len() + dst]
    }

    fn set(&mut self, src: usize, dst: usize, w: f64) {
        let n = self.nodes.len();
        self.weights[src * n + dst] = Some(w);
    }

    pub fn weight(&self, u: &NodeId, v: &NodeId) -> Option<f64> {
        self.get(self.nodes.index_of(u)?, self.nodes.index_of(v)?)
    }

    /// Number of slots holding a weight.
    pub fn len(&self) -> usize {
        self.weights.iter().filter(|w| w.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn centred_columns(tensor: &EffectTensor) -> Vec<Vec<f64>> {
    (0..tensor.n_nodes())
        .map(|u| {
            let col = tensor.column(u);
            let m = col.iter().sum::<f64>() / col.len() as f64;
            col.into_iter().map(|x| x - m).collect()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// CI weights: Pearson correlation of the two nodes' effect profiles across
/// examples, stored for both slot directions. Zero-variance columns get 0.
pub fn build_ci(tensor: &EffectTensor) -> Result<WeightMap> {
    if tensor.n_examples() < 2 {
        return Err(invalid("CI needs at least two examples"));
    }
    let cols = centred_columns(tensor);
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let n = cols.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|u| {
            (0..n)
                .map(|v| {
                    if u == v || norms[u] == 0.0 || norms[v] == 0.0 {
                        0.0
                    } else {
                        (dot(&cols[u], &cols[v]) / (norms[u] * norms[v])).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut map = WeightMap::empty(tensor.nodes(), tensor.slice(), Construction::CoInfluence);
    for (u, row) in rows.iter().enumerate() {
        for (v, w) in row.iter().enumerate() {
            if u != v {
                map.set(u, v, *w);
            }
        }
    }
    Ok(map)
}

/// Ridge added to the covariance diagonal before pseudo-inversion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ridge {
    #[default]
    /// `1e-3 ×` mean diagonal of the sample covariance.
    Auto,
    Fixed(f64),
}

pub const AUTO_RIDGE_FACTOR: f64 = 1e-3;

/// Sample covariance (divisor `N − 1`) of the tensor columns.
pub fn sample_covariance(tensor: &EffectTensor) -> SquareMatrix {
    let cols = centred_columns(tensor);
    let denom = (tensor.n_examples() - 1) as f64;
    let n = cols.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|u| (0..n).map(|v| dot(&cols[u], &cols[v]) / denom).collect())
        .collect();
    SquareMatrix::from_rows(&rows).expect("square")
}

/// PC weights `−Θ_uv / √(Θ_uu Θ_vv)` with `Θ = pinv(Σ + ridge·I)`.
pub fn build_pc(tensor: &EffectTensor, ridge: Ridge) -> Result<WeightMap> {
    if tensor.n_examples() < 2 {
        return Err(invalid("PC needs at least two examples"));
    }
    let mut sigma = sample_covariance(tensor);
    let n = sigma.n();
    let lambda = match ridge {
        Ridge::Fixed(r) if r >= 0.0 && r.is_finite() => r,
        Ridge::Fixed(r) => return Err(invalid(format!("ridge {r} must be finite and >= 0"))),
        Ridge::Auto => AUTO_RIDGE_FACTOR * (0..n).map(|i| sigma.get(i, i)).sum::<f64>() / n as f64,
    };
    for i in 0..n {
        sigma.set(i, i, sigma.get(i, i) + lambda);
    }
    let theta = symmetric_pinv(&sigma)?;
    let mut map = WeightMap::empty(tensor.nodes(), tensor.slice(), Construction::PartialCorrelation);
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let (tuu, tvv, tuv) = (theta.get(u, u), theta.get(v, v), theta.get(u, v));
            if !(tuu.is_finite() && tvv.is_finite() && tuv.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite precision entry at ({u}, {v})"
                )));
            }
            let w = if tuu > 0.0 && tvv > 0.0 {
                -0.5 * (tuv + theta.get(v, u)) / (tuu * tvv).sqrt()
            } else {
                0.0
            };
            map.set(u, v, w);
        }
    }
    Ok(map)
}

/// DI weights `mean_i(E_{u,v}^(i) − E_u^(i))` for each supplied pair. Every
/// pair must cover every example exactly once.
pub fn build_di(tensor: &EffectTensor, paired: &[PairedEffectRecord]) -> Result<WeightMap> {
    let nodes = tensor.nodes();
    let n_ex = tensor.n_examples();
    let mut groups: BTreeMap<(usize, usize), Vec<Option<f64>>> = BTreeMap::new();
    for rec in paired {
        let u = nodes
            .index_of(&rec.u)
            .ok_or_else(|| invalid(format!("node {} not in tensor", rec.u)))?;
        let v = nodes
            .index_of(&rec.v)
            .ok_or_else(|| invalid(format!("node {} not in tensor", rec.v)))?;
        if !precedes(&rec.u, &rec.v) {
            return Err(invalid(format!("paired record {} -> {} violates u < v", rec.u, rec.v)));
        }
        if !rec.joint_effect.is_finite() {
            return Err(Error::NonFinite {
                location: format!("paired effect {} -> {}", rec.u, rec.v),
                value: rec.joint_effect,
            });
        }
        if rec.example >= n_ex {
            return Err(invalid(format!("example index {} out of range", rec.example)));
        }
        let slot = &mut groups.entry((u, v)).or_insert_with(|| vec![None; n_ex])[rec.example];
        if slot.is_some() {
            return Err(invalid(format!(
                "duplicate paired record {} -> {} for example {}",
                rec.u, rec.v, rec.example
            )));
        }
        *slot = Some(rec.joint_effect);
    }
    let mut map = WeightMap::empty(nodes, tensor.slice(), Construction::DirectInfluence);
    for ((u, v), joints) in groups {
        let mut sum = 0.0;
        for (i, joint) in joints.iter().enumerate() {
            let joint = joint.ok_or_else(|| {
                invalid(format!(
                    "pair {} -> {} is missing example {i}",
                    nodes.node(u),
                    nodes.node(v)
                ))
            })?;
            sum += joint - tensor.get(i, u);
        }
        map.set(u, v, sum / n_ex as f64);
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Directed weighted graph over a fixed node set.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGraph {
    nodes: NodeSet,
    edges: Vec<Edge>,
    construction: Construction,
    slice: SliceId,
    k: usize,
    directed_constraint: bool,
}

impl PatchGraph {
    /// Builds a graph, checking its invariants and sorting edges canonically.
    pub fn new(
        nodes: NodeSet,
        mut edges: Vec<Edge>,
        construction: Construction,
        slice: SliceId,
        k: usize,
        directed_constraint: bool,
    ) -> Result<Self> {
        edges.sort_by_key(|e| (e.src, e.dst));
        let n = nodes.len();
        for pair in edges.windows(2) {
            if (pair[0].src, pair[0].dst) == (pair[1].src, pair[1].dst) {
                return Err(invalid(format!("duplicate edge slot {} -> {}", pair[0].src, pair[0].dst)));
            }
        }
        for e in &edges {
            if e.src >= n || e.dst >= n || e.src == e.dst {
                return Err(invalid(format!("invalid edge slot {} -> {}", e.src, e.dst)));
            }
            if !e.weight.is_finite() {
                return Err(Error::NonFinite {
                    location: format!("edge {} -> {}", e.src, e.dst),
                    value: e.weight,
                });
            }
            if directed_constraint && e.src >= e.dst {
                return Err(invalid(format!(
                    "edge {} -> {} violates the precedence constraint",
                    nodes.node(e.src),
                    nodes.node(e.dst)
                )));
            }
        }
        Ok(Self {
            nodes,
            edges,
            construction,
            slice,
            k,
            directed_constraint,
        })
    }

    /// Graph with no edges.
    pub fn empty(nodes: NodeSet, slice: SliceId) -> Self {
        Self {
            nodes,
            edges: Vec::new(),
            construction: Construction::CoInfluence,
            slice,
            k: 0,
            directed_constraint: true,
        }
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    /// Edges sorted by `(src, dst)` node index.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn slice(&self) -> &SliceId {
        &self.slice
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn directed_constraint(&self) -> bool {
        self.directed_constraint
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<f64> {
        self.edges
            .binary_search_by_key(&(src, dst), |e| (e.src, e.dst))
            .ok()
            .map(|i| self.edges[i].weight)
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[e.src] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[e.dst] += 1;
        }
        d
    }

    /// Same graph with a new edge list (used by the null controls).
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Self::new(
            self.nodes.clone(),
            edges,
            self.construction,
            self.slice.clone(),
            self.k,
            self.directed_constraint,
        )
    }
}

/// Keeps, per source, the `k` largest-`|w|` candidate slots. Ties go to the
/// earlier destination in canonical order; signs are kept; exact zeros and
/// absent slots are never edges. With `directed_constraint` only `u ≺ v`
/// slots are candidates.
pub fn sparsify_topk(weights: &WeightMap, k: usize, directed_constraint: bool) -> Result<PatchGraph> {
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    let n = weights.nodes.len();
    let mut edges = Vec::new();
    for u in 0..n {
        let mut cands: Vec<(usize, f64)> = (0..n)
            .filter(|&v| v != u && (!directed_constraint || u < v))
            .filter_map(|v| weights.get(u, v).map(|w| (v, w)))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        cands.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        edges.extend(cands.into_iter().take(k).map(|(v, w)| Edge {
            src: u,
            dst: v,
            weight: w,
        }));
    }
    PatchGraph::new(
        weights.nodes.clone(),
        edges,
        weights.construction,
        weights.slice.clone(),
        k,
        directed_constraint,
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphSidecar {
    construction: Construction,
    slice: SliceId,
    k: usize,
    directed_constraint: bool,
    layers: usize,
    tokens: usize,
    types: Vec<ComponentType>,
    n_edges: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_graph(graph: &PatchGraph, dir: &Path, stem: &str, config_hash: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    w.write_record(["src", "dst", "weight"])?;
    for e in &graph.edges {
        w.write_record([
            graph.nodes.node(e.src).name(),
            graph.nodes.node(e.dst).name(),
            fmt_f64(e.weight),
        ])?;
    }
    w.flush()?;
    let side = GraphSidecar {
        construction: graph.construction,
        slice: graph.slice.clone(),
        k: graph.k,
        directed_constraint: graph.directed_constraint,
        layers: graph.nodes.layers(),
        tokens: graph.nodes.tokens(),
        types: graph.nodes.types().to_vec(),
        n_edges: graph.edges.len(),
        config_hash: config_hash.map(str::to_string),
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&side)? + "\n",
    )?;
    Ok(())
}

pub fn read_graph(dir: &Path, stem: &str) -> Result<PatchGraph> {
    let side: GraphSidecar =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let nodes = NodeSet::new(side.layers, side.tokens, &side.types)?;
    let mut r = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
    let mut edges = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::ColumnCount {
                expected: 3,
                found: rec.len(),
            });
        }
        let lookup = |name: &str| -> Result<usize> {
            let id: NodeId = name.parse()?;
            nodes
                .index_of(&id)
                .ok_or_else(|| invalid(format!("node {name} outside graph node set")))
        };
        let weight = rec[2].parse::<f64>().map_err(|_| Error::Parse {
            row,
            column: 2,
            cell: rec[2].to_string(),
        })?;
        edges.push(Edge {
            src: lookup(&rec[0])?,
            dst: lookup(&rec[1])?,
            weight,
        });
    }
    PatchGraph::new(
        nodes,
        edges,
        side.construction,
        side.slice,
        side.k,
        side.directed_constraint,
    )
}
