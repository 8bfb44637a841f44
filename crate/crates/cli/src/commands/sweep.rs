use std::path::PathBuf;

use minibert::encoder::{load_checkpoint_path, WeightStore};
use minibert::eval::TaskKind;
use minibert::pretrain::{train_mlm, Corpus};
use minibert::tokenizer::Vocabulary;
use minibert::{Error, Result};
use serde::Serialize;

use super::print_plan;
use crate::config::{exists, require, RunConfig, SweepAxis, SweepDataset};
use crate::tasks;
use crate::Ctx;

#[derive(Debug, Clone)]
pub struct Row {
    pub axis: &'static str,
    pub value: String,
    pub dataset: String,
    pub seed: u64,
    /// P/R/F1, or strict/lenient/MRR for QA.
    pub metrics: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub axis: &'static str,
    pub value: String,
    pub dataset: String,
    pub metric: &'static str,
    pub runs: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median, min and max of the headline metric per (value, dataset), in
/// first-appearance order.
pub fn summarize(rows: &[Row], metric: &'static str) -> Vec<SummaryRow> {
    let mut groups: Vec<((String, String), Vec<f64>)> = Vec::new();
    for r in rows {
        let key = (r.value.clone(), r.dataset.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.metrics[2]),
            None => groups.push((key, vec![r.metrics[2]])),
        }
    }
    let axis = rows.first().map_or("", |r| r.axis);
    groups
        .into_iter()
        .map(|((value, dataset), v)| SummaryRow {
            axis,
            value,
            dataset,
            metric,
            runs: v.len(),
            median: median(&v),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

fn datasets(cfg: &RunConfig) -> Result<Vec<SweepDataset>> {
    let sets = if cfg.sweep.datasets.is_empty() {
        vec![SweepDataset {
            name: cfg.task.kind.name().into(),
            train: require(&cfg.paths.train, "train")?,
            dev: require(&cfg.paths.dev, "dev")?,
            test: require(&cfg.paths.test, "test")?,
        }]
    } else {
        cfg.sweep.datasets.clone()
    };
    for d in &sets {
        exists(&d.train, &format!("{} train", d.name))?;
        exists(&d.dev, &format!("{} dev", d.name))?;
        exists(&d.test, &format!("{} test", d.name))?;
    }
    Ok(sets)
}

/// Saved checkpoints ordered by their pre-training step.
fn checkpoints(dir: &PathBuf) -> Result<Vec<(usize, PathBuf, WeightStore)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("sweep.checkpoint_dir {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mbrt"))
        .collect();
    paths.sort();
    let mut out: Vec<(usize, PathBuf, WeightStore)> = Vec::new();
    for p in paths {
        let store = load_checkpoint_path(&p)?;
        let Some(step) = store
            .metadata
            .get("pretrain.steps")
            .and_then(|s| s.parse().ok())
        else {
            log::warn!("{}: no pretrain.steps metadata, skipped", p.display());
            continue;
        };
        if out.iter().any(|(s, _, _)| *s == step) {
            log::warn!("{}: duplicate step {step}, skipped", p.display());
            continue;
        }
        out.push((step, p, store));
    }
    out.sort_by_key(|(s, _, _)| *s);
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no checkpoints in {}",
            dir.display()
        )));
    }
    Ok(out)
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let sets = datasets(cfg)?;
    if cfg.sweep.seeds.is_empty() {
        return Err(Error::Config("sweep.seeds is empty".into()));
    }
    let vocab = Vocabulary::load_path(require(&cfg.paths.vocab, "vocab")?)?;
    cfg.finetune.validate()?;
    let data = sets
        .iter()
        .map(|d| {
            Ok((
                tasks::load(&d.train, &cfg.task)?,
                tasks::load(&d.dev, &cfg.task)?,
                tasks::load(&d.test, &cfg.task)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let axis = match cfg.sweep.axis {
        SweepAxis::Fraction => "fraction",
        SweepAxis::Checkpoint => "checkpoint",
    };
    let mut plan_lines = Vec::new();
    let ckpts = match cfg.sweep.axis {
        SweepAxis::Checkpoint => {
            let dir = cfg
                .sweep
                .checkpoint_dir
                .clone()
                .ok_or_else(|| Error::Config("sweep.checkpoint_dir is not set".into()))?;
            let c = checkpoints(&dir)?;
            plan_lines.extend(
                c.iter()
                    .map(|(s, p, _)| format!("step {s}: {}", p.display())),
            );
            c
        }
        SweepAxis::Fraction => {
            if cfg.sweep.fractions.is_empty() {
                return Err(Error::Config("sweep.fractions is empty".into()));
            }
            for &f in &cfg.sweep.fractions {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Config(format!("corpus fraction {f} outside (0, 1]")));
                }
            }
            require(&cfg.paths.corpus, "corpus")?;
            if let Some(p) = &cfg.paths.init {
                exists(p, "paths.init")?;
            }
            cfg.pretrain.validate()?;
            plan_lines.extend(cfg.sweep.fractions.iter().map(|f| format!("fraction {f}")));
            Vec::new()
        }
    };
    let values = match cfg.sweep.axis {
        SweepAxis::Fraction => cfg.sweep.fractions.len(),
        SweepAxis::Checkpoint => ckpts.len(),
    };
    plan_lines.push(format!(
        "{} runs: {values} values x {} datasets x {} seeds",
        values * sets.len() * cfg.sweep.seeds.len(),
        sets.len(),
        cfg.sweep.seeds.len()
    ));
    if ctx.dry_run {
        print_plan("sweep", &plan_lines, &cfg.to_toml()?);
        return Ok(());
    }

    let corpus = match cfg.sweep.axis {
        SweepAxis::Fraction => Some(Corpus::load_path(cfg.paths.corpus.as_ref().unwrap())?),
        SweepAxis::Checkpoint => None,
    };
    let init = cfg
        .paths
        .init
        .as_ref()
        .map(load_checkpoint_path)
        .transpose()?;
    let mut rows = Vec::new();
    for v in 0..values {
        for &seed in &cfg.sweep.seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.with_seed(seed);
            let (value, encoder) = match cfg.sweep.axis {
                SweepAxis::Checkpoint => (ckpts[v].0.to_string(), ckpts[v].2.clone()),
                SweepAxis::Fraction => {
                    let f = cfg.sweep.fractions[v];
                    let sub = corpus.as_ref().unwrap().subsample(f, seed)?;
                    log::info!(
                        "fraction {f} seed {seed}: pre-training on {} documents",
                        sub.documents.len()
                    );
                    let out = train_mlm(&sub, &run_cfg.pretrain, &vocab, init.as_ref())?;
                    (f.to_string(), out.weights)
                }
            };
            for (d, (train, dev, test)) in sets.iter().zip(&data) {
                let outcome = tasks::train(
                    &cfg.task,
                    train,
                    dev,
                    None,
                    &encoder,
                    &vocab,
                    &run_cfg.finetune,
                )?;
                let m =
                    tasks::evaluate(&outcome.weights, &vocab, test, &run_cfg.finetune)?.triple();
                log::info!("{axis} {value} {} seed {seed}: {:.4}", d.name, m[2]);
                rows.push(Row {
                    axis,
                    value: value.clone(),
                    dataset: d.name.clone(),
                    seed,
                    metrics: m,
                });
            }
        }
    }
    std::fs::create_dir_all(&ctx.out)?;
    let names = match cfg.task.kind {
        TaskKind::Qa => ["strict", "lenient", "mrr"],
        _ => ["precision", "recall", "f1"],
    };
    let mut w = csv_writer(&ctx.out.join("sweep.csv"))?;
    let header = [
        "axis", "value", "dataset", "seed", names[0], names[1], names[2],
    ];
    w.write_record(header).map_err(csv_error)?;
    for r in &rows {
        let seed = r.seed.to_string();
        let m = r.metrics.map(|x| x.to_string());
        w.write_record([r.axis, &r.value, &r.dataset, &seed, &m[0], &m[1], &m[2]])
            .map_err(csv_error)?;
    }
    w.flush()?;
    let summary = summarize(&rows, names[2]);
    let mut w = csv_writer(&ctx.out.join("summary.csv"))?;
    for s in &summary {
        w.serialize(s).map_err(csv_error)?;
    }
    w.flush()?;
    for s in &summary {
        println!(
            "{axis} {:>8} {:<10} median {:.4} min {:.4} max {:.4}",
            s.value, s.dataset, s.median, s.min, s.max
        );
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn csv_writer(path: &std::path::Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn summary_groups_by_value_and_dataset() {
        let row = |value: &str, seed, f| Row {
            axis: "fraction",
            value: value.into(),
            dataset: "ner".into(),
            seed,
            metrics: [0.0, 0.0, f],
        };
        let rows = vec![
            row("0.5", 0, 0.2),
            row("0.5", 1, 0.6),
            row("0.5", 2, 0.4),
            row("1", 0, 0.9),
        ];
        let s = summarize(&rows, "f1");
        assert_eq!(s.len(), 2);
        assert_eq!(
            (s[0].runs, s[0].median, s[0].min, s[0].max),
            (3, 0.4, 0.2, 0.6)
        );
        assert_eq!((s[1].runs, s[1].median), (1, 0.9));
    }
}
