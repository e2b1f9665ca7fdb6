// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared data model: component nodes, slices, effect tensors and their
//! on-disk directory format.
//!
//! An effect tensor directory holds two files:
//!
//! - `manifest.json`: schema version, slice, grid shape, component types,
//!   example count, canonical node list and optional per-example surface
//!   features and provenance.
//! - `effects.csv`: a header of canonical node names (`res.L3.T7`) followed by
//!   one row per example. Cells use shortest round-trip float formatting, so a
//!   write/read cycle is bit-exact.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::percentile_linear;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EFFECTS_FILE: &str = "effects.csv";

/// Component type of a node. Declaration order is the intra-position rank
/// (attention output, MLP output, residual stream after the block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentType {
    Att,
    Mlp,
    Res,
}

impl ComponentType {
    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Att => "att",
            Self::Mlp => "mlp",
            Self::Res => "res",
        }
    }
}

impl fmt::Display for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "att" => Ok(Self::Att),
            "mlp" => Ok(Self::Mlp),
            "res" => Ok(Self::Res),
            other => Err(invalid(format!("unknown component type {other:?}"))),
        }
    }
}

/// A component site `(layer, token, type)`. Layers are 0-based, tokens 1-based.
///
/// The derived ordering is the canonical node order: ascending layer, then
/// token, then type rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub token: usize,
    pub ctype: ComponentType,
}

impl NodeId {
    pub fn new(layer: usize, token: usize, ctype: ComponentType) -> Self {
        Self {
            layer,
            token,
            ctype,
        }
    }

    pub fn res(layer: usize, token: usize) -> Self {
        Self::new(layer, token, ComponentType::Res)
    }

    /// Canonical name, `"{ctype}.L{layer}.T{token}"`.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.L{}.T{}", self.ctype, self.layer, self.token)
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid(format!("malformed node name {s:?}"));
        let mut parts = s.split('.');
        let ctype: ComponentType = parts.next().ok_or_else(bad)?.parse()?;
        let layer = parts
            .next()
            .and_then(|p| p.strip_prefix('L'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad)?;
        let token = parts
            .next()
            .and_then(|p| p.strip_prefix('T'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self::new(layer, token, ctype))
    }
}

/// The fixed vertex universe shared by every graph of a study.
#[derive(Debug, Clone)]
pub struct NodeSet {
    layers: usize,
    tokens: usize,
    types: Vec<ComponentType>,
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
}

impl PartialEq for NodeSet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.tokens == other.tokens && self.types == other.types
    }
}

impl NodeSet {
    pub fn new(layers: usize, tokens: usize, types: &[ComponentType]) -> Result<Self> {
        if layers == 0 || tokens == 0 {
            return Err(invalid("node set needs at least one layer and one token"));
        }
        if types.is_empty() {
            return Err(invalid("node set needs at least one component type"));
        }
        let mut types = types.to_vec();
        types.sort();
        types.dedup();
        let mut nodes = Vec::with_capacity(layers * tokens * types.len());
        for layer in 0..layers {
            for token in 1..=tokens {
                for &ctype in &types {
                    nodes.push(NodeId::new(layer, token, ctype));
                }
            }
        }
        let index = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        Ok(Self {
            layers,
            tokens,
            types,
            nodes,
            index,
        })
    }

    /// Residual-stream-only node set, `layers × tokens` nodes.
    pub fn residual(layers: usize, tokens: usize) -> Result<Self> {
        Self::new(layers, tokens, &[ComponentType::Res])
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn types(&self) -> &[ComponentType] {
        &self.types
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, index: usize) -> NodeId {
        self.nodes[index]
    }

    pub fn index_of(&self, node: &NodeId) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.index.contains_key(node)
    }

    pub fn names(&self) -> Vec<String> {
        self.nodes.iter().map(NodeId::name).collect()
    }
}

/// A (task family, corruption type) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SliceId {
    pub family: String,
    pub corruption: String,
}

impl SliceId {
    pub fn new(family: impl Into<String>, corruption: impl Into<String>) -> Self {
        Self {
            family: family.into(),
            corruption: corruption.into(),
        }
    }
}

impl fmt::Display for SliceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family, self.corruption)
    }
}

/// Six prompt-surface features of one prompt pair, all computed from the
/// corrupted prompt and the target token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceMeta {
    /// Occurrences of the target token in the corrupted prompt.
    pub target_count: i64,
    /// Occurrences of the family's distractor token in the corrupted prompt.
    pub distractor_count: i64,
    /// 0-based position of the first token already seen earlier, `-1` if none.
    pub first_repeat_position: i64,
    /// Number of distinct token ids in the corrupted prompt.
    pub distinct_tokens: i64,
    pub prompt_length: i64,
    pub target_mod16: i64,
}

impl SurfaceMeta {
    pub const DIM: usize = 6;

    pub fn features(&self) -> [f64; Self::DIM] {
        [
            self.target_count as f64,
            self.distractor_count as f64,
            self.first_repeat_position as f64,
            self.distinct_tokens as f64,
            self.prompt_length as f64,
            self.target_mod16 as f64,
        ]
    }
}

/// Per-slice matrix of single-node patch effects, examples × nodes, in logit units.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectTensor {
    slice: SliceId,
    nodes: NodeSet,
    n_examples: usize,
    values: Vec<f64>,
    example_meta: Option<Vec<SurfaceMeta>>,
    provenance: BTreeMap<String, String>,
}

impl EffectTensor {
    /// Builds a tensor from example rows, each of length `nodes.len()`.
    pub fn new(slice: SliceId, nodes: NodeSet, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = nodes.len();
        let n_examples = rows.len();
        let mut values = Vec::with_capacity(n_examples * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::ColumnCount {
                    expected: width,
                    found: row.len(),
                });
            }
            for (u, v) in row.iter().enumerate() {
                check_finite(*v, || format!("row {i}, node {}", nodes.node(u)))?;
            }
            values.extend(row);
        }
        Ok(Self {
            slice,
            nodes,
            n_examples,
            values,
            example_meta: None,
            provenance: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, meta: Vec<SurfaceMeta>) -> Result<Self> {
        if meta.len() != self.n_examples {
            return Err(Error::Shape(format!(
                "{} surface records for {} examples",
                meta.len(),
                self.n_examples
            )));
        }
        self.example_meta = Some(meta);
        Ok(self)
    }

    pub fn with_provenance(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.provenance.insert(key.into(), value.into());
        self
    }

    pub fn slice(&self) -> &SliceId {
        &self.slice
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn n_examples(&self) -> usize {
        self.n_examples
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn example_meta(&self) -> Option<&[SurfaceMeta]> {
        self.example_meta.as_deref()
    }

    pub fn provenance(&self) -> &BTreeMap<String, String> {
        &self.provenance
    }

    pub fn get(&self, example: usize, node: usize) -> f64 {
        self.values[example * self.n_nodes() + node]
    }

    pub fn row(&self, example: usize) -> &[f64] {
        let w = self.n_nodes();
        &self.values[example * w..(example + 1) * w]
    }

    pub fn column(&self, node: usize) -> Vec<f64> {
        (0..self.n_examples).map(|i| self.get(i, node)).collect()
    }

    /// Tensor over the given example indices (repeats allowed, order kept).
    pub fn select_rows(&self, examples: &[usize]) -> Self {
        let mut values = Vec::with_capacity(examples.len() * self.n_nodes());
        for &i in examples {
            values.extend_from_slice(self.row(i));
        }
        let example_meta = self
            .example_meta
            .as_ref()
            .map(|m| examples.iter().map(|&i| m[i]).collect());
        Self {
            slice: self.slice.clone(),
            nodes: self.nodes.clone(),
            n_examples: examples.len(),
            values,
            example_meta,
            provenance: self.provenance.clone(),
        }
    }

    /// Restricts the tensor to the columns of one component type.
    pub fn restrict_to(&self, ctype: ComponentType) -> Result<Self> {
        if !self.nodes.types().contains(&ctype) {
            return Err(invalid(format!("tensor has no {ctype} nodes")));
        }
        let nodes = NodeSet::new(self.nodes.layers(), self.nodes.tokens(), &[ctype])?;
        let cols: Vec<usize> = nodes
            .nodes()
            .iter()
            .map(|n| self.nodes.index_of(n).expect("subset node"))
            .collect();
        let rows = (0..self.n_examples)
            .map(|i| cols.iter().map(|&c| self.get(i, c)).collect())
            .collect();
        let mut out = Self::new(self.slice.clone(), nodes, rows)?;
        out.example_meta = self.example_meta.clone();
        out.provenance = self.provenance.clone();
        Ok(out)
    }
}

/// Joint effect of patching `u` and `v` together on one example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedEffectRecord {
    pub u: NodeId,
    pub v: NodeId,
    pub example: usize,
    pub joint_effect: f64,
}

fn check_finite(value: f64, location: impl FnOnce() -> String) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            location: location(),
            value,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    slice: SliceId,
    layers: usize,
    tokens: usize,
    types: Vec<ComponentType>,
    n_examples: usize,
    nodes: Vec<String>,
    #[serde(default)]
    example_meta: Option<Vec<SurfaceMeta>>,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
}

/// Formats a float with the shortest representation that parses back to the
/// same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `manifest.json` and `effects.csv` into `dir`, creating it if needed.
pub fn write_effect_tensor(tensor: &EffectTensor, dir: &Path) -> Result<()> {
    for i in 0..tensor.n_examples() {
        for u in 0..tensor.n_nodes() {
            check_finite(tensor.get(i, u), || format!("row {i}, column {u}"))?;
        }
    }
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        slice: tensor.slice.clone(),
        layers: tensor.nodes.layers(),
        tokens: tensor.nodes.tokens(),
        types: tensor.nodes.types().to_vec(),
        n_examples: tensor.n_examples,
        nodes: tensor.nodes.names(),
        example_meta: tensor.example_meta.clone(),
        provenance: tensor.provenance.clone(),
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;

    let mut w = csv::Writer::from_path(dir.join(EFFECTS_FILE))?;
    w.write_record(&manifest.nodes)?;
    for i in 0..tensor.n_examples() {
        w.write_record(tensor.row(i).iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a tensor directory written by [`write_effect_tensor`] or by any
/// external tool following the same format.
pub fn read_effect_tensor(dir: &Path) -> Result<EffectTensor> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "schema version {} (supported: {SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    let nodes = NodeSet::new(manifest.layers, manifest.tokens, &manifest.types)?;
    if manifest.nodes != nodes.names() {
        return Err(Error::Schema(
            "manifest node list is not the canonical order for its grid".into(),
        ));
    }

    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(dir.join(EFFECTS_FILE))?;
    let header = r.headers()?.clone();
    if header.len() != nodes.len() {
        return Err(Error::ColumnCount {
            expected: nodes.len(),
            found: header.len(),
        });
    }
    if header.iter().zip(&manifest.nodes).any(|(a, b)| a != b) {
        return Err(Error::Schema("CSV header does not match manifest node list".into()));
    }
    let mut rows = Vec::with_capacity(manifest.n_examples);
    for (row_idx, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != nodes.len() {
            return Err(Error::ColumnCount {
                expected: nodes.len(),
                found: rec.len(),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(column, cell)| {
                cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    row: row_idx,
                    column,
                    cell: cell.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != manifest.n_examples {
        return Err(Error::Schema(format!(
            "manifest declares {} examples, CSV has {}",
            manifest.n_examples,
            rows.len()
        )));
    }
    let mut tensor = EffectTensor::new(manifest.slice, nodes, rows)?;
    if let Some(meta) = manifest.example_meta {
        tensor = tensor.with_meta(meta)?;
    }
    tensor.provenance = manifest.provenance;
    Ok(tensor)
}

/// Per-node mean effect over examples.
pub fn mean_effects(tensor: &EffectTensor) -> Result<Vec<f64>> {
    if tensor.n_examples() == 0 {
        return Err(invalid("mean effects need at least one example"));
    }
    let n = tensor.n_examples() as f64;
    let mut sums = vec![0.0; tensor.n_nodes()];
    for i in 0..tensor.n_examples() {
        for (s, v) in sums.iter_mut().zip(tensor.row(i)) {
            *s += v;
        }
    }
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Mean-effect grid and robust symmetric colour limit for one component type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapStats {
    pub slice: SliceId,
    pub ctype: ComponentType,
    /// `grid[layer][token - 1]`.
    pub grid: Vec<Vec<f64>>,
    /// 99th percentile (linear interpolation) of absolute mean effects.
    pub robust_limit: f64,
    pub n_examples: usize,
}

impl HeatmapStats {
    pub fn shape(&self) -> (usize, usize) {
        (self.grid.len(), self.grid.first().map_or(0, Vec::len))
    }
}

pub fn heatmap_stats(tensor: &EffectTensor) -> Result<HeatmapStats> {
    let types = tensor.nodes().types();
    if types.len() != 1 {
        return Err(invalid(format!(
            "heatmap needs a single component type, tensor has {}",
            types.len()
        )));
    }
    let means = mean_effects(tensor)?;
    let nodes = tensor.nodes();
    let mut grid = vec![vec![0.0; nodes.tokens()]; nodes.layers()];
    for (u, node) in nodes.nodes().iter().enumerate() {
        grid[node.layer][node.token - 1] = means[u];
    }
    let abs: Vec<f64> = means.iter().map(|m| m.abs()).collect();
    Ok(HeatmapStats {
        slice: tensor.slice().clone(),
        ctype: types[0],
        grid,
        robust_limit: percentile_linear(&abs, 99.0),
        n_examples: tensor.n_examples(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice() -> SliceId {
        SliceId::new("ioi", "abba")
    }

    #[test]
    fn node_set_order_and_size() {
        let ns = NodeSet::new(2, 3, &[ComponentType::Res, ComponentType::Att]).unwrap();
        assert_eq!(ns.len(), 2 * 3 * 2);
        assert_eq!(ns.node(0), NodeId::new(0, 1, ComponentType::Att));
        assert_eq!(ns.node(1), NodeId::new(0, 1, ComponentType::Res));
        assert!(ns.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn node_name_round_trip() {
        let n = NodeId::new(11, 10, ComponentType::Mlp);
        assert_eq!(n.name(), "mlp.L11.T10");
        assert_eq!(n.name().parse::<NodeId>().unwrap(), n);
        assert!("res.L1".parse::<NodeId>().is_err());
        assert!("foo.L1.T1".parse::<NodeId>().is_err());
    }

    #[test]
    fn nan_is_rejected() {
        let ns = NodeSet::residual(1, 1).unwrap();
        assert!(matches!(
            EffectTensor::new(slice(), ns, vec![vec![f64::NAN]]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn write_refuses_non_finite() {
        let ns = NodeSet::residual(1, 1).unwrap();
        let mut t = EffectTensor::new(slice(), ns, vec![vec![0.0]]).unwrap();
        t.values[0] = f64::INFINITY;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_effect_tensor(&t, dir.path()),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn single_zero_cell_round_trip() {
        let ns = NodeSet::residual(1, 1).unwrap();
        let t = EffectTensor::new(slice(), ns, vec![vec![0.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_effect_tensor(&t, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join(EFFECTS_FILE)).unwrap();
        assert_eq!(csv, "res.L0.T1\n0.0\n");
        assert_eq!(read_effect_tensor(dir.path()).unwrap(), t);
    }

    #[test]
    fn gpt2_shaped_csv_dimensions() {
        let ns = NodeSet::residual(12, 10).unwrap();
        let rows = (0..100)
            .map(|i| (0..120).map(|u| (i * 120 + u) as f64 * 0.1).collect())
            .collect();
        let t = EffectTensor::new(slice(), ns, rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_effect_tensor(&t, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join(EFFECTS_FILE)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 101);
        assert!(lines.iter().all(|l| l.split(',').count() == 120));
    }

    #[test]
    fn column_count_mismatch_is_reported() {
        let ns = NodeSet::residual(12, 10).unwrap();
        let t = EffectTensor::new(slice(), ns, vec![vec![1.0; 120]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_effect_tensor(&t, dir.path()).unwrap();
        let path = dir.path().join(EFFECTS_FILE);
        let csv = fs::read_to_string(&path).unwrap();
        let truncated: Vec<String> = csv
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect();
        fs::write(&path, truncated.join("\n") + "\n").unwrap();
        assert!(matches!(
            read_effect_tensor(dir.path()),
            Err(Error::ColumnCount {
                expected: 120,
                found: 119
            })
        ));
    }

    #[test]
    fn unsupported_schema_and_bad_cells() {
        let ns = NodeSet::residual(1, 2).unwrap();
        let t = EffectTensor::new(slice(), ns, vec![vec![1.0, 2.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_effect_tensor(&t, dir.path()).unwrap();

        let csv_path = dir.path().join(EFFECTS_FILE);
        fs::write(&csv_path, "res.L0.T1,res.L0.T2\n1.0,abc\n").unwrap();
        assert!(matches!(
            read_effect_tensor(dir.path()),
            Err(Error::Parse { column: 1, .. })
        ));

        let mpath = dir.path().join(MANIFEST_FILE);
        let m = fs::read_to_string(&mpath).unwrap();
        fs::write(&mpath, m.replace("\"schema_version\": 1", "\"schema_version\": 9")).unwrap();
        assert!(matches!(read_effect_tensor(dir.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn mean_of_constant_rows_and_symmetry() {
        let ns = NodeSet::residual(1, 3).unwrap();
        let r = vec![0.5, -2.0, 7.25];
        let t = EffectTensor::new(slice(), ns.clone(), vec![r.clone(); 4]).unwrap();
        assert_eq!(mean_effects(&t).unwrap(), r);

        let ns1 = NodeSet::residual(1, 1).unwrap();
        let t = EffectTensor::new(slice(), ns1, vec![vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(mean_effects(&t).unwrap(), vec![0.0]);
    }

    #[test]
    fn heatmap_grid_shape_and_limit() {
        let ns = NodeSet::residual(12, 11).unwrap();
        let t = EffectTensor::new(slice(), ns, vec![vec![0.0; 132]; 8]).unwrap();
        let h = heatmap_stats(&t).unwrap();
        assert_eq!(h.shape(), (12, 11));
        assert_eq!(h.robust_limit, 0.0);
    }

    #[test]
    fn heatmap_rejects_mixed_types_and_restrict_fixes_it() {
        let ns = NodeSet::new(2, 2, &[ComponentType::Att, ComponentType::Res]).unwrap();
        let rows = vec![(0..8).map(f64::from).collect::<Vec<_>>()];
        let t = EffectTensor::new(slice(), ns, rows).unwrap();
        assert!(heatmap_stats(&t).is_err());
        let res = t.restrict_to(ComponentType::Res).unwrap();
        assert_eq!(res.row(0), &[1.0, 3.0, 5.0, 7.0]);
        assert_eq!(heatmap_stats(&res).unwrap().shape(), (2, 2));
    }
}
