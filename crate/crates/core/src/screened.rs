// SPDX-License-Identifier: MIT OR Apache-2.0

//! Screened paired-patching validation: candidate edges ranked on a
//! discovery pool, then re-measured by paired patching on held-out prompts.
//!
//! Activation influence `I` and necessity `Nec` are this crate's own
//! definitions:
//!
//! * `I = ‖a_v(patch u) − a_v(corrupted)‖ / (‖a_v(clean) − a_v(corrupted)‖ + ε)`,
//!   read at the destination node, so 0 means no influence and 1 means `u`
//!   fully restores `v`'s clean activation.
//! * `Nec = E_u − effect(patch u while v is pinned to its corrupted value)`.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::eval::split_examples;
use crate::graph::{build_ci, build_pc, Ridge, WeightMap};
use crate::rng::{derive_seed, rng_for, tag};
use crate::stats::{mean, sample_std, t_test_greater_than_zero};
use crate::tensor::{fmt_f64, ComponentType, EffectTensor, NodeId, SliceId};
use crate::toy::{build_effect_tensor, gen_prompt_family, Corruption, PatchSession, PromptFamily, Source, ToyModel};

pub const INFLUENCE_EPS: f64 = 1e-8;
/// Fewest evaluation prompts for which the per-edge t-test is run.
pub const MIN_TEST_PROMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenKind {
    TopCi,
    TopPc,
    Random,
    LowRankCi,
}

impl ScreenKind {
    pub const ALL: [ScreenKind; 4] = [Self::TopCi, Self::TopPc, Self::Random, Self::LowRankCi];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TopCi => "top_ci",
            Self::TopPc => "top_pc",
            Self::Random => "random",
            Self::LowRankCi => "low_rank_ci",
        }
    }
}

impl std::fmt::Display for ScreenKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScreenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown screen {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub kind: ScreenKind,
    pub n_edges: usize,
    pub seed: u64,
}

impl ScreenSpec {
    pub fn new(kind: ScreenKind, seed: u64) -> Self {
        Self { kind, n_edges: 50, seed }
    }
}

/// Residual-stream slots `u ≺ v` as node-index pairs.
fn residual_slots(tensor: &EffectTensor) -> Vec<(usize, usize)> {
    let nodes = tensor.nodes().nodes();
    let res: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].ctype == ComponentType::Res).collect();
    res.iter()
        .enumerate()
        .flat_map(|(a, &u)| res[a + 1..].iter().map(move |&v| (u, v)))
        .collect()
}

/// Slots ranked by `|w|` descending, ties to the earlier slot.
fn ranked(slots: &[(usize, usize)], map: &WeightMap) -> Vec<((usize, usize), f64)> {
    let mut out: Vec<((usize, usize), f64)> = slots
        .iter()
        .map(|&(u, v)| ((u, v), map.get(u, v).unwrap_or(0.0).abs()))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Candidate edges `(u, v)` with `u ≺ v` over residual-stream nodes of the
/// discovery tensor. The low-rank screen walks the top ranking backwards, so
/// the top and low-rank halves of a full ranking are disjoint.
pub fn screen_candidates(tensor: &EffectTensor, spec: &ScreenSpec, ridge: Ridge) -> Result<Vec<(NodeId, NodeId)>> {
    if spec.n_edges == 0 {
        return Err(invalid("n_edges must be >= 1"));
    }
    if tensor.n_examples() < 2 {
        return Err(invalid("the discovery pool needs at least two examples"));
    }
    let slots = residual_slots(tensor);
    if slots.len() < spec.n_edges {
        return Err(invalid(format!(
            "{} edges requested but only {} residual slots exist",
            spec.n_edges,
            slots.len()
        )));
    }
    let picked: Vec<(usize, usize)> = match spec.kind {
        ScreenKind::TopCi => ranked(&slots, &build_ci(tensor)?)
            .into_iter()
            .take(spec.n_edges)
            .map(|r| r.0)
            .collect(),
        ScreenKind::TopPc => ranked(&slots, &build_pc(tensor, ridge)?)
            .into_iter()
            .take(spec.n_edges)
            .map(|r| r.0)
            .collect(),
        ScreenKind::LowRankCi => {
            let nonzero: Vec<(usize, usize)> = ranked(&slots, &build_ci(tensor)?)
                .into_iter()
                .rev()
                .filter(|r| r.1 > 0.0)
                .map(|r| r.0)
                .collect();
            if nonzero.len() < spec.n_edges {
                return Err(invalid(format!(
                    "{} edges requested but only {} slots have a nonzero CI weight",
                    spec.n_edges,
                    nonzero.len()
                )));
            }
            nonzero[..spec.n_edges].to_vec()
        }
        ScreenKind::Random => {
            let mut rng = rng_for(spec.seed, &[tag("random-screen")]);
            let mut idx = sample(&mut rng, slots.len(), spec.n_edges).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| slots[i]).collect()
        }
    };
    let nodes = tensor.nodes();
    Ok(picked.into_iter().map(|(u, v)| (nodes.node(u), nodes.node(v))).collect())
}

/// Per-prompt metrics of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptMetrics {
    pub influence: f64,
    pub mediation: f64,
    pub necessity: f64,
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `I`, `M = E_{u,v} − E_v` and `Nec` of edge `u → v` on one prompt pair.
pub fn prompt_metrics(session: &PatchSession<'_>, u: NodeId, v: NodeId) -> Result<PromptMetrics> {
    let base = session.observable(session.corrupted());
    let a_corr = session.corrupted().site(&v);
    let a_clean = session.clean().site(&v);

    let patched_u = session.run(&[(u, Source::Clean)])?;
    let e_u = session.observable(&patched_u) - base;
    let influence = l2_diff(patched_u.site(&v), a_corr) / (l2_diff(a_clean, a_corr) + INFLUENCE_EPS);

    let e_v = session.patch_effect(&[v])?;
    let e_uv = session.patch_effect(&[u, v])?;
    let pinned = session.run(&[(u, Source::Clean), (v, Source::Corrupted)])?;
    let necessity = e_u - (session.observable(&pinned) - base);
    let m = PromptMetrics {
        influence,
        mediation: e_uv - e_v,
        necessity,
    };
    for (name, x) in [("I", m.influence), ("M", m.mediation), ("Nec", m.necessity)] {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                location: format!("{name} of edge {u} -> {v}"),
                value: x,
            });
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub src: NodeId,
    pub dst: NodeId,
    pub i_mean: f64,
    pub i_std: f64,
    pub m_mean: f64,
    pub m_std: f64,
    pub nec_mean: f64,
    pub nec_std: f64,
    /// One-sided t-test of per-prompt `I > 0`.
    pub p_value: f64,
    /// Set by the group-level BH correction.
    pub fdr_pass: bool,
}

fn edge_report(sessions: &[PatchSession<'_>], u: NodeId, v: NodeId) -> Result<EdgeReport> {
    if sessions.len() < MIN_TEST_PROMPTS {
        return Err(invalid(format!(
            "the t-test needs at least {MIN_TEST_PROMPTS} evaluation prompts, got {}",
            sessions.len()
        )));
    }
    let per: Vec<PromptMetrics> = sessions
        .iter()
        .map(|s| prompt_metrics(s, u, v))
        .collect::<Result<_>>()?;
    let col = |f: fn(&PromptMetrics) -> f64| per.iter().map(f).collect::<Vec<f64>>();
    let (i, m, nec) = (col(|p| p.influence), col(|p| p.mediation), col(|p| p.necessity));
    Ok(EdgeReport {
        src: u,
        dst: v,
        i_mean: mean(&i),
        i_std: sample_std(&i),
        m_mean: mean(&m),
        m_std: sample_std(&m),
        nec_mean: mean(&nec),
        nec_std: sample_std(&nec),
        p_value: t_test_greater_than_zero(&i),
        fdr_pass: false,
    })
}

/// Metrics of edge `u → v` over the evaluation prompts. Means and sample
/// standard deviations are taken over prompts. `fdr_pass` is left unset.
pub fn evaluate_edge(model: &ToyModel, edge: (NodeId, NodeId), eval_pairs: &[crate::toy::PromptPair]) -> Result<EdgeReport> {
    let sessions = eval_pairs
        .iter()
        .map(|p| PatchSession::new(model, p))
        .collect::<Result<Vec<_>>>()?;
    edge_report(&sessions, edge.0, edge.1)
}

/// Benjamini–Hochberg step-up. Rejects the `k*` smallest p-values, where
/// `k*` is the largest rank `k` with `p_(k) ≤ k·α/m`.
pub fn bh_fdr(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let k_star = (1..=m)
        .rev()
        .find(|&k| p_values[order[k - 1]] <= k as f64 * alpha / m as f64)
        .unwrap_or(0);
    let mut out = vec![false; m];
    for &i in &order[..k_star] {
        out[i] = true;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenConfig {
    /// Prompt pairs generated in total, split evenly into discovery and
    /// evaluation pools.
    pub n_prompts: usize,
    pub n_edges: usize,
    pub alpha: f64,
    pub ridge: Ridge,
    pub screens: Vec<ScreenKind>,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            n_prompts: 100,
            n_edges: 50,
            alpha: 0.05,
            ridge: Ridge::Auto,
            screens: ScreenKind::ALL.to_vec(),
        }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_edges == 0 {
            return Err(Error::Config("screen.n_edges must be >= 1".into()));
        }
        if self.n_prompts / 2 < MIN_TEST_PROMPTS {
            return Err(Error::Config(format!(
                "screen.n_prompts must give at least {MIN_TEST_PROMPTS} evaluation prompts"
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("screen.alpha {} must be in (0, 1]", self.alpha)));
        }
        if self.screens.is_empty() {
            return Err(Error::Config("screen.screens is empty".into()));
        }
        Ok(())
    }
}

/// One Table-8 row: a screen's edges summarised across edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub screen: ScreenKind,
    pub edges: usize,
    /// Mean and sample std over edges of the per-edge mean `I`.
    pub i_mean: f64,
    pub i_std: f64,
    pub fdr_pass: usize,
    pub m_mean: f64,
    pub m_std: f64,
    pub nec_mean: f64,
    pub nec_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedStudy {
    pub slice: SliceId,
    pub seed: u64,
    pub discovery: Vec<usize>,
    pub evaluation: Vec<usize>,
    pub groups: Vec<GroupSummary>,
    pub edges: Vec<(ScreenKind, EdgeReport)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl ScreenedStudy {
    pub fn group(&self, screen: ScreenKind) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.screen == screen)
    }

    pub fn group_edges(&self, screen: ScreenKind) -> impl Iterator<Item = &EdgeReport> {
        self.edges.iter().filter(move |(k, _)| *k == screen).map(|(_, e)| e)
    }

    /// Table-8 layout: `screen, edges, I, I FDR, M, Nec` with `mean±std`
    /// cells at three decimals.
    pub fn write_table_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["screen", "edges", "I", "I FDR", "M", "Nec"])?;
        for g in &self.groups {
            w.write_record([
                g.screen.as_str().to_string(),
                g.edges.to_string(),
                format!("{:.3}±{:.3}", g.i_mean, g.i_std),
                format!("{}/{}", g.fdr_pass, g.edges),
                format!("{:.3}±{:.3}", g.m_mean, g.m_std),
                format!("{:.3}±{:.3}", g.nec_mean, g.nec_std),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Full-precision per-edge metrics.
    pub fn write_edges_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "screen", "src", "dst", "i_mean", "i_std", "m_mean", "m_std", "nec_mean", "nec_std", "p_value",
            "fdr_pass",
        ])?;
        for (k, e) in &self.edges {
            let mut rec = vec![k.as_str().to_string(), e.src.name(), e.dst.name()];
            rec.extend(
                [e.i_mean, e.i_std, e.m_mean, e.m_std, e.nec_mean, e.nec_std, e.p_value]
                    .iter()
                    .map(|x| fmt_f64(*x)),
            );
            rec.push(e.fdr_pass.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn summarise(screen: ScreenKind, edges: &[EdgeReport]) -> GroupSummary {
    let col = |f: fn(&EdgeReport) -> f64| edges.iter().map(f).collect::<Vec<f64>>();
    let (i, m, nec) = (col(|e| e.i_mean), col(|e| e.m_mean), col(|e| e.nec_mean));
    GroupSummary {
        screen,
        edges: edges.len(),
        i_mean: mean(&i),
        i_std: sample_std(&i),
        fdr_pass: edges.iter().filter(|e| e.fdr_pass).count(),
        m_mean: mean(&m),
        m_std: sample_std(&m),
        nec_mean: mean(&nec),
        nec_std: sample_std(&nec),
    }
}

/// Generates `config.n_prompts` pairs of one slice, splits them 50/50 into
/// discovery and evaluation pools, screens each group on the discovery
/// tensor and evaluates every screened edge on the evaluation prompts. BH
/// is applied within each group.
pub fn run_screened_study(
    model: &ToyModel,
    family: PromptFamily,
    corruption: Corruption,
    config: &ScreenConfig,
    seed: u64,
) -> Result<ScreenedStudy> {
    config.validate()?;
    let mc = model.config();
    let pairs = gen_prompt_family(family, corruption, config.n_prompts, mc.tokens, mc.vocab, seed)?;
    let (discovery, evaluation) = split_examples(pairs.len(), derive_seed(seed, &[tag("screen-split")]))?;
    if discovery.iter().any(|i| evaluation.binary_search(i).is_ok()) {
        return Err(Error::Numeric("discovery and evaluation pools overlap".into()));
    }
    let slice = SliceId::new(family.as_str(), corruption.as_str());
    let disc_pairs: Vec<_> = discovery.iter().map(|&i| pairs[i].clone()).collect();
    let tensor = build_effect_tensor(model, slice.clone(), &disc_pairs, None)?;
    let sessions = evaluation
        .iter()
        .map(|&i| PatchSession::new(model, &pairs[i]))
        .collect::<Result<Vec<_>>>()?;

    let mut groups = Vec::new();
    let mut edges = Vec::new();
    for &kind in &config.screens {
        let spec = ScreenSpec {
            kind,
            n_edges: config.n_edges,
            seed: derive_seed(seed, &[tag(kind.as_str())]),
        };
        let candidates = screen_candidates(&tensor, &spec, config.ridge)?;
        let mut reports = candidates
            .par_iter()
            .map(|&(u, v)| edge_report(&sessions, u, v))
            .collect::<Result<Vec<_>>>()?;
        let p: Vec<f64> = reports.iter().map(|e| e.p_value).collect();
        for (e, pass) in reports.iter_mut().zip(bh_fdr(&p, config.alpha)) {
            e.fdr_pass = pass;
        }
        groups.push(summarise(kind, &reports));
        edges.extend(reports.into_iter().map(|e| (kind, e)));
    }
    Ok(ScreenedStudy {
        slice,
        seed,
        discovery,
        evaluation,
        groups,
        edges,
        config_hash: None,
    })
}
