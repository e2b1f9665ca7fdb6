// SPDX-License-Identifier: MIT OR Apache-2.0

//! Study configuration and the staged, checkpointed pipeline behind the CLI.
//!
//! Output layout under the study directory:
//!
//! ```text
//! config.json                effective configuration and its hash
//! tensors/<slice>/           manifest.json + effects.csv per slice
//! graphs/<slice>/            full.{csv,json} and boot_NNN.{csv,json}
//! embeddings/                <rep>.csv, pca_<rep>.{csv,json,svg}
//! bench/                     report.json, report.csv
//! screen/                    table.csv, edges.csv, study.json
//! heatmap/                   <slice>_<type>.{csv,json,svg}
//! ```
//!
//! Each stage directory holds a `stage.json` with the config hash. A stage
//! whose hash matches is skipped unless forced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::{embed, pca_project, write_embeddings_csv, Embedding};
use crate::error::{Error, Result};
use crate::eval::{bootstrap_draws, draw_graph, run_benchmark, ProtocolConfig};
use crate::graph::{read_graph, write_graph, PatchGraph};
use crate::plot::{heatmap_svg, scatter_svg};
use crate::rng::{derive_seed, tag};
use crate::screened::{run_screened_study, ScreenConfig};
use crate::tensor::{
    fmt_f64, heatmap_stats, read_effect_tensor, write_effect_tensor, ComponentType, EffectTensor, NodeSet, SliceId,
};
use crate::toy::{build_effect_tensor, gen_planted_tensors, gen_prompt_family, Corruption, PlantedConfig, PromptFamily, ToyModel, ToyModelConfig};

pub const STAGE_FILE: &str = "stage.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub family: PromptFamily,
    pub corruption: Corruption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySource {
    pub model: ToyModelConfig,
    pub slices: Vec<SliceSpec>,
    pub n_examples: usize,
    /// Component types patched at every layer and position.
    pub types: Vec<ComponentType>,
}

impl Default for ToySource {
    fn default() -> Self {
        let binding = |corruption| SliceSpec {
            family: PromptFamily::BindingTask,
            corruption,
        };
        Self {
            model: ToyModelConfig::default(),
            slices: vec![
                binding(Corruption::SwapOne),
                binding(Corruption::SwapBoth),
                binding(Corruption::SwapSubject),
            ],
            n_examples: 100,
            types: vec![ComponentType::Res],
        }
    }
}

/// Where effect tensors come from. The study seed replaces the planted
/// generator's own `seed` field and seeds toy prompt generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Planted(PlantedConfig),
    Toy(ToySource),
    /// Directory of slice tensor directories, read in name order.
    Directory { path: PathBuf },
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self::Planted(PlantedConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenStage {
    pub model: ToyModelConfig,
    pub family: PromptFamily,
    pub corruption: Corruption,
    pub params: ScreenConfig,
}

impl Default for ScreenStage {
    fn default() -> Self {
        Self {
            model: ToyModelConfig::default(),
            family: PromptFamily::BindingTask,
            corruption: Corruption::SwapOne,
            params: ScreenConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub svg: bool,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self { svg: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub source: SourceConfig,
    pub protocol: ProtocolConfig,
    pub screen: ScreenStage,
    pub heatmap: HeatmapConfig,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::Config(m),
        other => other,
    }
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.screen.params.validate()?;
        self.screen.model.validate().map_err(config_err)?;
        if !self.screen.family.corruptions().contains(&self.screen.corruption) {
            return Err(Error::Config(format!(
                "screen corruption {} is not defined for {}",
                self.screen.corruption, self.screen.family
            )));
        }
        match &self.source {
            SourceConfig::Planted(p) => p.validate().map_err(config_err),
            SourceConfig::Toy(t) => {
                t.model.validate().map_err(config_err)?;
                if t.slices.is_empty() || t.n_examples == 0 || t.types.is_empty() {
                    return Err(Error::Config("toy source needs slices, examples and types".into()));
                }
                for (i, s) in t.slices.iter().enumerate() {
                    if !s.family.corruptions().contains(&s.corruption) {
                        return Err(Error::Config(format!(
                            "corruption {} is not defined for {}",
                            s.corruption, s.family
                        )));
                    }
                    if t.slices[..i].contains(s) {
                        return Err(Error::Config(format!("duplicate slice {}:{}", s.family, s.corruption)));
                    }
                }
                Ok(())
            }
            SourceConfig::Directory { .. } => Ok(()),
        }
    }

    /// Hex SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StageManifest {
    stage: String,
    config_hash: String,
    artifacts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    /// Artifacts with the same config hash were already present.
    Skipped,
}

/// Stage names in `run-all` order.
pub const STAGES: [&str; 6] = ["generate", "graphs", "embed", "bench", "screen", "heatmap"];

fn stage_dir(stage: &str) -> &'static str {
    match stage {
        "generate" => "tensors",
        "graphs" => "graphs",
        "embed" => "embeddings",
        "bench" => "bench",
        "screen" => "screen",
        "heatmap" => "heatmap",
        _ => unreachable!("unknown stage {stage}"),
    }
}

/// Filesystem-safe directory name of a slice.
pub fn slice_dir_name(slice: &SliceId) -> String {
    format!("{}__{}", slice.family, slice.corruption)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub struct Pipeline {
    config: StudyConfig,
    out: PathBuf,
    force: bool,
    hash: String,
}

impl Pipeline {
    pub fn new(config: StudyConfig, out: impl Into<PathBuf>, force: bool) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self {
            config,
            out: out.into(),
            force,
            hash,
        })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn stage_path(&self, stage: &str) -> PathBuf {
        self.out.join(stage_dir(stage))
    }

    fn manifest(&self, stage: &str) -> Option<StageManifest> {
        let text = fs::read_to_string(self.stage_path(stage).join(STAGE_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Errors unless `stage` has completed under the current config.
    fn require(&self, stage: &str) -> Result<StageManifest> {
        let path = self.stage_path(stage).join(STAGE_FILE);
        match self.manifest(stage) {
            Some(m) if m.config_hash == self.hash => Ok(m),
            _ => Err(Error::MissingArtifact {
                stage: stage.into(),
                path,
            }),
        }
    }

    /// Runs `body` into a fresh stage directory unless it is up to date.
    fn stage(&self, stage: &str, body: impl FnOnce(&Path) -> Result<Vec<String>>) -> Result<StageOutcome> {
        if !self.force && self.manifest(stage).is_some_and(|m| m.config_hash == self.hash) {
            return Ok(StageOutcome::Skipped);
        }
        write_json(
            &self.out.join("config.json"),
            &serde_json::json!({ "config_hash": self.hash, "config": self.config }),
        )?;
        let dir = self.stage_path(stage);
        if dir.join(STAGE_FILE).exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        let artifacts = body(&dir)?;
        write_json(
            &dir.join(STAGE_FILE),
            &StageManifest {
                stage: stage.into(),
                config_hash: self.hash.clone(),
                artifacts,
            },
        )?;
        Ok(StageOutcome::Ran)
    }

    fn source_tensors(&self) -> Result<Vec<EffectTensor>> {
        let seed = self.config.seed;
        let tensors = match &self.config.source {
            SourceConfig::Planted(p) => gen_planted_tensors(&PlantedConfig { seed, ..p.clone() })?
                .into_iter()
                .map(|t| t.with_provenance("source", "planted").with_provenance("separation", fmt_f64(p.separation)))
                .collect(),
            SourceConfig::Toy(t) => {
                let model = ToyModel::new(t.model.clone())?;
                let nodes = NodeSet::new(t.model.layers, t.model.tokens, &t.types)?;
                t.slices
                    .iter()
                    .map(|s| {
                        let pairs = gen_prompt_family(s.family, s.corruption, t.n_examples, t.model.tokens, t.model.vocab, seed)?;
                        let slice = SliceId::new(s.family.as_str(), s.corruption.as_str());
                        Ok(build_effect_tensor(&model, slice, &pairs, Some(&nodes))?
                            .with_provenance("source", "toy")
                            .with_provenance("model_seed", t.model.seed.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            SourceConfig::Directory { path } => {
                let mut dirs: Vec<PathBuf> = fs::read_dir(path)
                    .map_err(|e| Error::Config(format!("cannot list source directory {}: {e}", path.display())))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.join(crate::tensor::MANIFEST_FILE).is_file())
                    .collect();
                dirs.sort();
                if dirs.is_empty() {
                    return Err(Error::Config(format!("no tensor directories under {}", path.display())));
                }
                dirs.iter()
                    .map(|d| Ok(read_effect_tensor(d)?.with_provenance("source", d.display().to_string())))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(tensors
            .into_iter()
            .map(|t| {
                t.with_provenance("seed", seed.to_string())
                    .with_provenance("config_hash", self.hash.clone())
            })
            .collect())
    }

    pub fn generate(&self) -> Result<StageOutcome> {
        self.stage("generate", |dir| {
            let mut names = Vec::new();
            for t in self.source_tensors()? {
                let name = slice_dir_name(t.slice());
                if names.contains(&name) {
                    return Err(Error::Config(format!("two slices map to directory {name}")));
                }
                write_effect_tensor(&t, &dir.join(&name))?;
                names.push(name);
            }
            Ok(names)
        })
    }

    /// Slice tensors written by `generate`.
    pub fn load_tensors(&self) -> Result<Vec<EffectTensor>> {
        let m = self.require("generate")?;
        let dir = self.stage_path("generate");
        m.artifacts.iter().map(|name| read_effect_tensor(&dir.join(name))).collect()
    }

    /// Writes each slice's full-pool graph and `n_boot_train` bootstrap
    /// graphs drawn from all of its examples.
    pub fn graphs(&self) -> Result<StageOutcome> {
        let tensors = self.load_tensors()?;
        let p = &self.config.protocol;
        self.stage("graphs", |dir| {
            let mut artifacts = Vec::new();
            for (s, t) in tensors.iter().enumerate() {
                let name = slice_dir_name(t.slice());
                let sdir = dir.join(&name);
                let all: Vec<usize> = (0..t.n_examples()).collect();
                write_graph(&draw_graph(t, &all, p)?, &sdir, "full", Some(&self.hash))?;
                let seed = derive_seed(self.config.seed, &[tag("graphs"), s as u64]);
                for (b, draw) in bootstrap_draws(&all, p.n_boot_train, p.sample_frac, seed)?.iter().enumerate() {
                    let stem = format!("boot_{b:03}");
                    write_graph(&draw_graph(t, draw, p)?, &sdir, &stem, Some(&self.hash))?;
                    artifacts.push(format!("{name}/{stem}"));
                }
            }
            Ok(artifacts)
        })
    }

    /// Bootstrap graphs from the `graphs` stage as `(slice dir, label, graph)`.
    pub fn load_graphs(&self) -> Result<Vec<(String, String, PatchGraph)>> {
        let m = self.require("graphs")?;
        let dir = self.stage_path("graphs");
        m.artifacts
            .iter()
            .map(|label| {
                let (slice, stem) = label.split_once('/').ok_or_else(|| Error::Schema(format!("bad graph label {label}")))?;
                Ok((slice.to_string(), label.clone(), read_graph(&dir.join(slice), stem)?))
            })
            .collect()
    }

    /// Embedding CSV and PCA scatter (CSV, JSON, SVG) per representation.
    pub fn embed(&self) -> Result<StageOutcome> {
        let graphs = self.load_graphs()?;
        let mut slices: Vec<String> = graphs.iter().map(|g| g.0.clone()).collect();
        slices.dedup();
        let labels: Vec<String> = graphs.iter().map(|g| g.1.clone()).collect();
        self.stage("embed", |dir| {
            let mut artifacts = Vec::new();
            for &rep in &self.config.protocol.reps {
                let embs = graphs
                    .iter()
                    .map(|g| embed(&g.2, rep, &self.config.protocol.embed))
                    .collect::<Result<Vec<Embedding>>>()?;
                let file = format!("{rep}.csv");
                write_embeddings_csv(&dir.join(&file), &labels, &embs)?;
                artifacts.push(file);
                if embs.len() < 2 {
                    continue;
                }
                let pca = pca_project(&embs)?;
                let mut w = csv::Writer::from_path(dir.join(format!("pca_{rep}.csv")))?;
                w.write_record(["graph", "slice", "pc1", "pc2"])?;
                let mut points = Vec::new();
                for ((g, label), c) in graphs.iter().zip(&labels).zip(&pca.coords) {
                    w.write_record([label.clone(), g.0.clone(), fmt_f64(c[0]), fmt_f64(c[1])])?;
                    points.push((slices.iter().position(|s| *s == g.0).unwrap_or(0), *c));
                }
                w.flush()?;
                write_json(
                    &dir.join(format!("pca_{rep}.json")),
                    &serde_json::json!({
                        "rep": rep,
                        "explained_variance": pca.explained_variance,
                        "config_hash": self.hash,
                    }),
                )?;
                fs::write(dir.join(format!("pca_{rep}.svg")), scatter_svg(&format!("PCA of {rep} embeddings"), &slices, &points))?;
                artifacts.extend(["csv", "json", "svg"].map(|ext| format!("pca_{rep}.{ext}")));
            }
            Ok(artifacts)
        })
    }

    pub fn bench(&self) -> Result<StageOutcome> {
        let tensors = self.load_tensors()?;
        self.stage("bench", |dir| {
            let mut report = run_benchmark(&tensors, &self.config.protocol)?;
            report.config_hash = Some(self.hash.clone());
            report.write_json(&dir.join("report.json"))?;
            report.write_csv(&dir.join("report.csv"))?;
            Ok(vec!["report.json".into(), "report.csv".into()])
        })
    }

    /// Screened paired-patching study on the configured toy model. Needs no
    /// upstream artifacts.
    pub fn screen(&self) -> Result<StageOutcome> {
        self.stage("screen", |dir| {
            let sc = &self.config.screen;
            let model = ToyModel::new(sc.model.clone())?;
            let mut study = run_screened_study(&model, sc.family, sc.corruption, &sc.params, self.config.seed)?;
            study.config_hash = Some(self.hash.clone());
            study.write_table_csv(&dir.join("table.csv"))?;
            study.write_edges_csv(&dir.join("edges.csv"))?;
            study.write_json(&dir.join("study.json"))?;
            Ok(vec!["table.csv".into(), "edges.csv".into(), "study.json".into()])
        })
    }

    /// Mean-effect grid, robust limit and optional SVG per slice and type.
    pub fn heatmap(&self) -> Result<StageOutcome> {
        let tensors = self.load_tensors()?;
        self.stage("heatmap", |dir| {
            let mut artifacts = Vec::new();
            for t in &tensors {
                for &ctype in t.nodes().types() {
                    let stats = heatmap_stats(&t.restrict_to(ctype)?)?;
                    let stem = format!("{}_{ctype}", slice_dir_name(t.slice()));
                    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
                    let (_, tokens) = stats.shape();
                    w.write_record(std::iter::once("layer".to_string()).chain((1..=tokens).map(|t| format!("T{t}"))))?;
                    for (l, row) in stats.grid.iter().enumerate() {
                        w.write_record(std::iter::once(l.to_string()).chain(row.iter().map(|x| fmt_f64(*x))))?;
                    }
                    w.flush()?;
                    write_json(
                        &dir.join(format!("{stem}.json")),
                        &serde_json::json!({
                            "slice": stats.slice,
                            "ctype": stats.ctype,
                            "layers": stats.grid.len(),
                            "tokens": tokens,
                            "robust_limit": stats.robust_limit,
                            "n_examples": stats.n_examples,
                            "config_hash": self.hash,
                        }),
                    )?;
                    artifacts.push(format!("{stem}.csv"));
                    artifacts.push(format!("{stem}.json"));
                    if self.config.heatmap.svg {
                        fs::write(dir.join(format!("{stem}.svg")), heatmap_svg(&stats))?;
                        artifacts.push(format!("{stem}.svg"));
                    }
                }
            }
            Ok(artifacts)
        })
    }

    pub fn run_stage(&self, stage: &str) -> Result<StageOutcome> {
        match stage {
            "generate" => self.generate(),
            "graphs" => self.graphs(),
            "embed" => self.embed(),
            "bench" => self.bench(),
            "screen" => self.screen(),
            "heatmap" => self.heatmap(),
            other => Err(Error::Config(format!("unknown stage {other:?}"))),
        }
    }

    pub fn run_all(&self) -> Result<Vec<(&'static str, StageOutcome)>> {
        STAGES.iter().map(|&s| Ok((s, self.run_stage(s)?))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_and_validates() {
        let c = StudyConfig::default();
        c.validate().unwrap();
        let back: StudyConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: StudyConfig = serde_json::from_str(
            r#"{"seed": 3, "source": {"kind": "planted", "n_slices": 4, "separation": 0.0}}"#,
        )
        .unwrap();
        let SourceConfig::Planted(p) = &c.source else { panic!() };
        assert_eq!((p.n_slices, p.n_examples), (4, 100));
        assert_eq!(c.protocol, ProtocolConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<StudyConfig>(r#"{"sede": 3}"#).is_err());
        assert!(serde_json::from_str::<StudyConfig>(r#"{"protocol": {"kk": 3}}"#).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut c = StudyConfig::default();
        c.protocol.k = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = StudyConfig::default();
        c.source = SourceConfig::Planted(PlantedConfig {
            noise_scale: 0.0,
            ..Default::default()
        });
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = StudyConfig::default();
        c.screen.corruption = Corruption::TokenSwap;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = StudyConfig::default();
        let b = StudyConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn slice_names_are_path_safe() {
        assert_eq!(slice_dir_name(&SliceId::new("planted", "s0")), "planted__s0");
        assert_eq!(slice_dir_name(&SliceId::new("a/b", "c d")), "a_b__c_d");
    }
}
