//! Run configuration: a TOML file, then `--set` overrides, then `--seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use minibert::data::FixtureRecipe;
use minibert::eval::TaskKind;
use minibert::heads::FinetuneConfig;
use minibert::pretrain::PretrainConfig;
use minibert::rng::derive_seed;
use minibert::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub vocab: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    /// Checkpoint that pre-training continues from.
    pub init: Option<PathBuf>,
    /// Encoder (finetune, sweep) or fine-tuned model (evaluate).
    pub checkpoint: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Generic span dataset for the first QA phase.
    pub intermediate: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKind,
    /// Tag scheme of CoNLL inputs: "bio" or "bioes".
    pub scheme: String,
    /// Repair invalid tag transitions instead of rejecting the file.
    pub lenient: bool,
    /// Relation labels, negative label first.
    pub labels: Vec<String>,
    /// Placeholders every relation sentence must contain.
    pub placeholders: Vec<String>,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            kind: TaskKind::Ner,
            scheme: "bio".into(),
            lenient: false,
            labels: vec!["0".into(), "1".into()],
            placeholders: Vec::new(),
        }
    }
}

/// Batch-size by learning-rate grid; empty lists fall back to the single
/// values in `[finetune]`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f32>,
}

impl GridSection {
    pub fn is_empty(&self) -> bool {
        self.batch_sizes.is_empty() && self.learning_rates.is_empty()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalDataset {
    pub name: String,
    pub path: PathBuf,
    /// Score this prediction file instead of running a model.
    pub predictions: Option<PathBuf>,
    /// Free-text note on where the split came from.
    pub split: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub datasets: Vec<EvalDataset>,
    /// Cross-validation folds; 0 evaluates a fine-tuned model as is.
    pub folds: usize,
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepDataset {
    pub name: String,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Pre-train on a sub-sample of the corpus.
    Fraction,
    /// Fine-tune from each saved pre-training checkpoint.
    Checkpoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Directory of `pretrain` output for the checkpoint axis.
    pub checkpoint_dir: Option<PathBuf>,
    /// Defaults to one dataset built from `[paths]`.
    pub datasets: Vec<SweepDataset>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: SweepAxis::Fraction,
            fractions: vec![0.25, 0.5, 1.0],
            seeds: vec![0, 1, 2],
            checkpoint_dir: None,
            datasets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// The only seed; stage seeds are derived from it.
    pub seed: u64,
    pub paths: Paths,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub task: TaskSection,
    pub grid: GridSection,
    pub eval: EvalSection,
    pub sweep: SweepSection,
    pub fixtures: FixtureRecipe,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Apply one `dotted.key=value` override; the value is read as TOML and
/// falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part} is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("config: {e}")))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.with_seed(cfg.seed);
        Ok(cfg)
    }

    /// Point every stage at `seed`.
    pub fn with_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.pretrain.seed = seed;
        self.pretrain.encoder.seed = derive_seed(seed, "pretrain.init");
        self.finetune.seed = seed;
        self.fixtures.seed = seed;
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config: {e}")))
    }
}

/// The path under `name`, which must be set and exist.
pub fn require(path: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let p = path
        .clone()
        .ok_or_else(|| Error::Config(format!("paths.{name} is not set")))?;
    exists(&p, name)?;
    Ok(p)
}

pub fn exists(p: &Path, what: &str) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what}: {} does not exist",
            p.display()
        )))
    }
}
