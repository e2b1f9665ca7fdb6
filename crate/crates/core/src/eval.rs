// SPDX-License-Identifier: MIT OR Apache-2.0

//! Benchmark protocol: example-disjoint train/test pools, bootstrap graphs,
//! representation × kernel sweeps, shuffle nulls and non-graph baselines,
//! aggregated over seeds.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{embed, feature_matrix, EmbedParams, Embedding, Rep};
use crate::error::{invalid, Error, Result};
use crate::graph::{build_ci, build_pc, sparsify_topk, Construction, Edge, PatchGraph, Ridge};
use crate::kernel::{cross_kernel, linear_kernel, median_heuristic_gamma, rbf_kernel, KernelKind};
use crate::rng::{derive_seed, rng_for, tag};
use crate::stats::{mean, population_std};
use crate::svm::{accuracy, MulticlassSvm};
use crate::tensor::{fmt_f64, EffectTensor, SurfaceMeta};

/// RBF bandwidth used when the median heuristic is undefined (all training
/// points identical).
pub const FALLBACK_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub seeds: Vec<u64>,
    pub n_boot_train: usize,
    pub n_boot_test: usize,
    pub sample_frac: f64,
    pub k: usize,
    pub construction: Construction,
    pub ridge: Ridge,
    pub directed_constraint: bool,
    pub reps: Vec<Rep>,
    pub kernels: Vec<KernelKind>,
    /// Use only the first `n` examples of every slice.
    pub n_examples: Option<usize>,
    pub c: f64,
    pub embed: EmbedParams,
    pub controls: bool,
    /// Representation the shuffle nulls are embedded with.
    pub control_rep: Rep,
    pub baselines: bool,
    /// Nodes marked by the node-identity baseline.
    pub node_identity_m: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            seeds: vec![7, 42, 123],
            n_boot_train: 32,
            n_boot_test: 32,
            sample_frac: 0.75,
            k: 5,
            construction: Construction::CoInfluence,
            ridge: Ridge::Auto,
            directed_constraint: true,
            reps: Rep::ALL.to_vec(),
            kernels: vec![KernelKind::Linear, KernelKind::Rbf],
            n_examples: None,
            c: 1.0,
            embed: EmbedParams::default(),
            controls: true,
            control_rep: Rep::FixedWeighted,
            baselines: true,
            node_identity_m: 20,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.n_boot_train == 0 || self.n_boot_test == 0 {
            return Err(Error::Config("bootstrap counts must be >= 1".into()));
        }
        if !(self.sample_frac > 0.0 && self.sample_frac <= 1.0) {
            return Err(Error::Config(format!("sample_frac {} outside (0, 1]", self.sample_frac)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.construction == Construction::DirectInfluence {
            return Err(Error::Config("the benchmark builds CI or PC graphs only".into()));
        }
        if self.kernels.is_empty() {
            return Err(Error::Config("at least one kernel is required".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C = {} must be finite and > 0", self.c)));
        }
        if self.node_identity_m == 0 {
            return Err(Error::Config("node_identity_m must be >= 1".into()));
        }
        if self.embed.hash_dim == 0 {
            return Err(Error::Config("hash_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Seeded 50/50 partition of example indices `0..n`. The train pool gets
/// the extra example when `n` is odd. Both pools are sorted.
pub fn split_examples(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(invalid(format!("need at least two examples to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[tag("split")]));
    let n_train = n - n / 2;
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `⌈frac · |pool|⌉`, ignoring floating-point noise below 1e-9.
pub fn bootstrap_size(pool: usize, frac: f64) -> usize {
    ((frac * pool as f64 - 1e-9).ceil() as usize).max(1)
}

/// `n_boot` draws of `⌈frac·|pool|⌉` pool members with replacement.
pub fn bootstrap_draws(pool: &[usize], n_boot: usize, frac: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if pool.is_empty() {
        return Err(invalid("bootstrap pool is empty"));
    }
    let size = bootstrap_size(pool.len(), frac);
    let mut rng = rng_for(seed, &[tag("bootstrap")]);
    Ok((0..n_boot)
        .map(|_| (0..size).map(|_| pool[rng.random_range(0..pool.len())]).collect())
        .collect())
}

/// Graph of one bootstrap draw under the configured construction.
pub fn draw_graph(tensor: &EffectTensor, draw: &[usize], config: &ProtocolConfig) -> Result<PatchGraph> {
    let sub = tensor.select_rows(draw);
    let weights = match config.construction {
        Construction::CoInfluence => build_ci(&sub)?,
        Construction::PartialCorrelation => build_pc(&sub, config.ridge)?,
        Construction::DirectInfluence => {
            return Err(Error::Config("the benchmark builds CI or PC graphs only".into()))
        }
    };
    sparsify_topk(&weights, config.k, config.directed_constraint)
}

pub fn bootstrap_graphs(
    tensor: &EffectTensor,
    pool: &[usize],
    config: &ProtocolConfig,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<PatchGraph>> {
    bootstrap_draws(pool, n_boot, config.sample_frac, seed)?
        .par_iter()
        .map(|d| draw_graph(tensor, d, config))
        .collect()
}

/// Moves every edge to a uniformly drawn destination, keeping its source
/// and weight. A source's new destinations are distinct, differ from the
/// source and respect the precedence constraint when the graph does. A
/// source with fewer valid destinations than edges keeps its edges.
pub fn edge_shuffle(g: &PatchGraph, seed: u64) -> Result<PatchGraph> {
    let n = g.nodes().len();
    let mut rng = rng_for(seed, &[tag("edge-shuffle")]);
    let mut out = Vec::with_capacity(g.n_edges());
    let edges = g.edges();
    let mut start = 0;
    while start < edges.len() {
        let src = edges[start].src;
        let end = start + edges[start..].iter().take_while(|e| e.src == src).count();
        let group = &edges[start..end];
        let valid: Vec<usize> = (0..n)
            .filter(|&v| v != src && (!g.directed_constraint() || v > src))
            .collect();
        if valid.len() < group.len() {
            out.extend_from_slice(group);
        } else {
            let picks = sample(&mut rng, valid.len(), group.len());
            for (e, p) in group.iter().zip(picks.iter()) {
                out.push(Edge {
                    src,
                    dst: valid[p],
                    weight: e.weight,
                });
            }
        }
        start = end;
    }
    g.with_edges(out)
}

/// Permutes weights across the existing edge slots.
pub fn weight_shuffle(g: &PatchGraph, seed: u64) -> Result<PatchGraph> {
    let mut weights: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    weights.shuffle(&mut rng_for(seed, &[tag("weight-shuffle")]));
    let edges = g
        .edges()
        .iter()
        .zip(weights)
        .map(|(e, weight)| Edge { weight, ..*e })
        .collect();
    g.with_edges(edges)
}

/// Per-node mean effect over each draw.
pub fn baseline_raw(tensor: &EffectTensor, draws: &[Vec<usize>]) -> Vec<Vec<f64>> {
    draws
        .iter()
        .map(|d| {
            let mut acc = vec![0.0; tensor.n_nodes()];
            for &i in d {
                for (a, x) in acc.iter_mut().zip(tensor.row(i)) {
                    *a += x;
                }
            }
            acc.iter().map(|a| a / d.len() as f64).collect()
        })
        .collect()
}

/// Mean of the six surface features over each draw.
pub fn baseline_surface(meta: &[SurfaceMeta], draws: &[Vec<usize>]) -> Vec<Vec<f64>> {
    draws
        .iter()
        .map(|d| {
            let mut acc = [0.0; SurfaceMeta::DIM];
            for &i in d {
                for (a, x) in acc.iter_mut().zip(meta[i].features()) {
                    *a += x;
                }
            }
            acc.iter().map(|a| a / d.len() as f64).collect()
        })
        .collect()
}

/// Indicator of the `m` nodes with largest `|mean effect|` over each draw,
/// ties to the earlier node.
pub fn baseline_node_identity(tensor: &EffectTensor, draws: &[Vec<usize>], m: usize) -> Vec<Vec<f64>> {
    baseline_raw(tensor, draws)
        .into_iter()
        .map(|means| {
            let mut order: Vec<usize> = (0..means.len()).collect();
            order.sort_by(|&a, &b| means[b].abs().total_cmp(&means[a].abs()).then(a.cmp(&b)));
            let mut v = vec![0.0; means.len()];
            for &u in order.iter().take(m) {
                v[u] = 1.0;
            }
            v
        })
        .collect()
}

/// Accuracy of a kernel SVM trained on `train` and scored on `test`.
/// Checks kernel validity and dual feasibility of every trained model.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_features(
    train: &[Vec<f64>],
    train_y: &[usize],
    test: &[Vec<f64>],
    test_y: &[usize],
    n_classes: usize,
    kernel: KernelKind,
    c: f64,
    seed: u64,
) -> Result<f64> {
    Ok(score_features(train, train_y, test, test_y, n_classes, kernel, c, seed)?.0)
}

/// Accuracy plus the number of binary heads that hit the SMO iteration cap.
#[allow(clippy::too_many_arguments)]
fn score_features(
    train: &[Vec<f64>],
    train_y: &[usize],
    test: &[Vec<f64>],
    test_y: &[usize],
    n_classes: usize,
    kernel: KernelKind,
    c: f64,
    seed: u64,
) -> Result<(f64, usize)> {
    let (k, gamma) = match kernel {
        KernelKind::Linear => (linear_kernel(train)?, None),
        KernelKind::Rbf => {
            let g = median_heuristic_gamma(train).unwrap_or(FALLBACK_GAMMA);
            (rbf_kernel(train, Some(g))?, Some(g))
        }
    };
    k.check_psd()?;
    let model = MulticlassSvm::train(&k, train_y, n_classes, c, seed)?;
    for m in &model.models {
        m.check_dual_feasibility()?;
    }
    let capped = model.models.iter().filter(|m| !m.converged).count();
    let kt = cross_kernel(kernel, gamma, test, train)?;
    Ok((accuracy(&model.predict(&kt)?, test_y), capped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Representation,
    Control,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub name: String,
    pub kind: RowKind,
    pub kernel: KernelKind,
    /// Feature dimension (largest over seeds for data-dependent reps).
    pub dim: usize,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub slices: Vec<String>,
    pub n_examples: Vec<usize>,
    pub chance: f64,
    pub rows: Vec<EvalRow>,
    pub notes: Vec<String>,
    pub config: ProtocolConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl EvalReport {
    pub fn row(&self, name: &str, kernel: KernelKind) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.name == name && r.kernel == kernel)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// One row per representation × kernel plus a chance row:
    /// `representation,kind,kernel,dim,mean,std`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["representation", "kind", "kernel", "dim", "mean", "std"])?;
        for r in &self.rows {
            let kind = serde_json::to_value(r.kind)?;
            w.write_record([
                r.name.clone(),
                kind.as_str().unwrap_or_default().to_string(),
                r.kernel.to_string(),
                r.dim.to_string(),
                format!("{:.4}", r.mean),
                format!("{:.4}", r.std),
            ])?;
        }
        w.write_record([
            "chance".to_string(),
            "baseline".to_string(),
            "-".to_string(),
            "-".to_string(),
            format!("{:.4}", self.chance),
            fmt_f64(0.0),
        ])?;
        w.flush()?;
        Ok(())
    }
}

struct SeedRow {
    name: String,
    kind: RowKind,
    kernel: KernelKind,
    dim: usize,
    acc: f64,
    capped: usize,
}

#[allow(clippy::too_many_arguments)]
fn score_rows(
    name: &str,
    kind: RowKind,
    train: &[Vec<f64>],
    train_y: &[usize],
    test: &[Vec<f64>],
    test_y: &[usize],
    n_classes: usize,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<Vec<SeedRow>> {
    let dim = train.first().map_or(0, Vec::len);
    config
        .kernels
        .iter()
        .map(|&kernel| {
            let (acc, capped) = score_features(train, train_y, test, test_y, n_classes, kernel, config.c, seed)?;
            Ok(SeedRow {
                name: name.to_string(),
                kind,
                kernel,
                dim,
                acc,
                capped,
            })
        })
        .collect()
}

/// Train rows then test rows of one representation, aligned jointly.
fn embed_split(
    train: &[PatchGraph],
    test: &[PatchGraph],
    rep: Rep,
    params: &EmbedParams,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let embs: Vec<Embedding> = train
        .par_iter()
        .chain(test.par_iter())
        .map(|g| embed(g, rep, params))
        .collect::<Result<_>>()?;
    let mut rows = feature_matrix(&embs)?.rows;
    let test_rows = rows.split_off(train.len());
    Ok((rows, test_rows))
}

fn run_seed(
    slices: &[EffectTensor],
    config: &ProtocolConfig,
    seed: u64,
    notes: &mut BTreeSet<String>,
) -> Result<Vec<SeedRow>> {
    let s_count = slices.len();
    let mut train_draws = Vec::new();
    let mut test_draws = Vec::new();
    for (s, t) in slices.iter().enumerate() {
        let (train, test) = split_examples(t.n_examples(), derive_seed(seed, &[tag("split"), s as u64]))?;
        if train.iter().any(|i| test.binary_search(i).is_ok()) {
            return Err(Error::Numeric("train and test pools overlap".into()));
        }
        let seed_tr = derive_seed(seed, &[tag("boot"), s as u64, 0]);
        let seed_te = derive_seed(seed, &[tag("boot"), s as u64, 1]);
        train_draws.push(bootstrap_draws(&train, config.n_boot_train, config.sample_frac, seed_tr)?);
        test_draws.push(bootstrap_draws(&test, config.n_boot_test, config.sample_frac, seed_te)?);
    }
    let train_y: Vec<usize> = (0..s_count).flat_map(|s| vec![s; config.n_boot_train]).collect();
    let test_y: Vec<usize> = (0..s_count).flat_map(|s| vec![s; config.n_boot_test]).collect();

    let build = |draws: &[Vec<Vec<usize>>]| -> Result<Vec<PatchGraph>> {
        let jobs: Vec<(usize, &Vec<usize>)> = draws
            .iter()
            .enumerate()
            .flat_map(|(s, ds)| ds.iter().map(move |d| (s, d)))
            .collect();
        jobs.par_iter()
            .map(|(s, d)| draw_graph(&slices[*s], d, config))
            .collect()
    };
    let needs_graphs = !config.reps.is_empty() || config.controls;
    let (train_g, test_g) = if needs_graphs {
        (build(&train_draws)?, build(&test_draws)?)
    } else {
        (Vec::new(), Vec::new())
    };

    let mut rows = Vec::new();
    let score = |name: &str, kind, tr: &[Vec<f64>], te: &[Vec<f64>]| {
        score_rows(name, kind, tr, &train_y, te, &test_y, s_count, config, seed)
    };
    for &rep in &config.reps {
        let (tr, te) = embed_split(&train_g, &test_g, rep, &config.embed)?;
        rows.extend(score(rep.as_str(), RowKind::Representation, &tr, &te)?);
    }

    if config.controls {
        type Shuffle = fn(&PatchGraph, u64) -> Result<PatchGraph>;
        let controls: [(&str, Shuffle); 2] = [("edge_shuffle", edge_shuffle), ("weight_shuffle", weight_shuffle)];
        for (name, shuffle) in controls {
            let apply = |gs: &[PatchGraph], part: u64| -> Result<Vec<PatchGraph>> {
                gs.par_iter()
                    .enumerate()
                    .map(|(i, g)| shuffle(g, derive_seed(seed, &[tag(name), part, i as u64])))
                    .collect()
            };
            let (tr, te) = embed_split(&apply(&train_g, 0)?, &apply(&test_g, 1)?, config.control_rep, &config.embed)?;
            rows.extend(score(name, RowKind::Control, &tr, &te)?);
        }
    }

    if config.baselines {
        let collect = |f: &dyn Fn(usize, &[Vec<usize>]) -> Vec<Vec<f64>>, draws: &[Vec<Vec<usize>>]| {
            draws
                .iter()
                .enumerate()
                .flat_map(|(s, d)| f(s, d))
                .collect::<Vec<_>>()
        };
        let raw = |s: usize, d: &[Vec<usize>]| baseline_raw(&slices[s], d);
        rows.extend(score("raw", RowKind::Baseline, &collect(&raw, &train_draws), &collect(&raw, &test_draws))?);

        if slices.iter().all(|t| t.example_meta().is_some()) {
            let surf = |s: usize, d: &[Vec<usize>]| baseline_surface(slices[s].example_meta().unwrap_or(&[]), d);
            rows.extend(score(
                "surface",
                RowKind::Baseline,
                &collect(&surf, &train_draws),
                &collect(&surf, &test_draws),
            )?);
        } else {
            notes.insert("surface baseline skipped: slices carry no prompt metadata".into());
        }

        let m = config.node_identity_m;
        let ident = |s: usize, d: &[Vec<usize>]| baseline_node_identity(&slices[s], d, m);
        rows.extend(score(
            "node_identity",
            RowKind::Baseline,
            &collect(&ident, &train_draws),
            &collect(&ident, &test_draws),
        )?);
    }
    Ok(rows)
}

/// Runs the full protocol over `slices` (one class per slice).
pub fn run_benchmark(slices: &[EffectTensor], config: &ProtocolConfig) -> Result<EvalReport> {
    config.validate()?;
    if slices.len() < 2 {
        return Err(invalid("the benchmark needs at least two slices"));
    }
    if slices.iter().any(|t| t.nodes() != slices[0].nodes()) {
        return Err(invalid("all slices must share one node set"));
    }
    let slices: Vec<EffectTensor> = match config.n_examples {
        None => slices.to_vec(),
        Some(n) => slices
            .iter()
            .map(|t| {
                if t.n_examples() < n {
                    Err(invalid(format!("slice {} has {} < {n} examples", t.slice(), t.n_examples())))
                } else {
                    Ok(t.select_rows(&(0..n).collect::<Vec<_>>()))
                }
            })
            .collect::<Result<_>>()?,
    };

    let mut notes = BTreeSet::new();
    let per_seed: Vec<Vec<SeedRow>> = config
        .seeds
        .iter()
        .map(|&seed| run_seed(&slices, config, seed, &mut notes))
        .collect::<Result<_>>()?;

    for rows in &per_seed {
        for row in rows.iter().filter(|r| r.capped > 0) {
            notes.insert(format!(
                "{} ({}): SVM stopped at the iteration cap before the KKT tolerance",
                row.name, row.kernel
            ));
        }
    }
    let rows = (0..per_seed[0].len())
        .map(|r| {
            let accs: Vec<f64> = per_seed.iter().map(|rows| rows[r].acc).collect();
            let first = &per_seed[0][r];
            EvalRow {
                name: first.name.clone(),
                kind: first.kind,
                kernel: first.kernel,
                dim: per_seed.iter().map(|rows| rows[r].dim).max().unwrap_or(0),
                mean: mean(&accs),
                std: population_std(&accs),
                per_seed: accs,
            }
        })
        .collect();
    Ok(EvalReport {
        slices: slices.iter().map(|t| t.slice().to_string()).collect(),
        n_examples: slices.iter().map(EffectTensor::n_examples).collect(),
        chance: 1.0 / slices.len() as f64,
        rows,
        notes: notes.into_iter().collect(),
        config: config.clone(),
        config_hash: None,
    })
}
