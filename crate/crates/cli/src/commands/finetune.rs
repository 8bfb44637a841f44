use std::collections::BTreeMap;

use minibert::encoder::{load_checkpoint_path, save_checkpoint_path, WeightStore};
use minibert::eval::{fingerprint_text, DatasetResult, EvalReport, TaskKind};
use minibert::heads::{FinetuneConfig, FinetuneLog};
use minibert::tokenizer::Vocabulary;
use minibert::{Error, Result};
use serde::Serialize;

use super::{print_plan, write};
use crate::config::{exists, require, RunConfig};
use crate::tasks::{self, Dataset};
use crate::Ctx;

/// One grid cell: batch size and learning rate.
pub fn cells(cfg: &RunConfig) -> Vec<FinetuneConfig> {
    if cfg.grid.is_empty() {
        return vec![cfg.finetune.clone()];
    }
    let batches = if cfg.grid.batch_sizes.is_empty() {
        vec![cfg.finetune.batch_size]
    } else {
        cfg.grid.batch_sizes.clone()
    };
    let rates = if cfg.grid.learning_rates.is_empty() {
        vec![cfg.finetune.learning_rate]
    } else {
        cfg.grid.learning_rates.clone()
    };
    let mut out = Vec::new();
    for &b in &batches {
        for &lr in &rates {
            let mut c = cfg.finetune.clone();
            c.batch_size = b;
            c.learning_rate = lr;
            out.push(c);
        }
    }
    out
}

fn cell_name(c: &FinetuneConfig) -> String {
    format!("b{}-lr{:e}", c.batch_size, c.learning_rate)
}

#[derive(Serialize)]
struct CellSummary {
    cell: String,
    batch_size: usize,
    learning_rate: f32,
    best_epoch: usize,
    dev: f64,
}

#[derive(Serialize)]
struct GridSummary {
    metric: &'static str,
    best: String,
    cells: Vec<CellSummary>,
}

pub fn primary_name(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Qa => "mrr",
        _ => "f1",
    }
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let vocab_path = require(&cfg.paths.vocab, "vocab")?;
    let init_path = require(&cfg.paths.checkpoint, "checkpoint")?;
    let train_path = require(&cfg.paths.train, "train")?;
    let dev_path = require(&cfg.paths.dev, "dev")?;
    if let Some(p) = &cfg.paths.test {
        exists(p, "paths.test")?;
    }
    if let Some(p) = &cfg.paths.intermediate {
        if cfg.task.kind != TaskKind::Qa {
            return Err(Error::Config(
                "paths.intermediate only applies to qa".into(),
            ));
        }
        exists(p, "paths.intermediate")?;
    }
    let cells = cells(cfg);
    for c in &cells {
        c.validate()?;
    }
    let vocab = Vocabulary::load_path(&vocab_path)?;
    let init = load_checkpoint_path(&init_path)?;
    let train = tasks::load(&train_path, &cfg.task)?;
    let dev = tasks::load(&dev_path, &cfg.task)?;
    let intermediate = cfg
        .paths
        .intermediate
        .as_ref()
        .map(|p| tasks::load(p, &cfg.task))
        .transpose()?;
    let test = cfg
        .paths
        .test
        .as_ref()
        .map(|p| tasks::load(p, &cfg.task))
        .transpose()?;

    if ctx.dry_run {
        let mut lines = vec![
            format!("task: {}", cfg.task.kind.name()),
            format!("init: {}", init_path.display()),
            format!("train: {} examples, dev: {}", train.len(), dev.len()),
        ];
        if let Some(t) = &test {
            lines.push(format!("test: {} examples", t.len()));
        }
        if let Some(i) = &intermediate {
            lines.push(format!("intermediate: {} examples", i.len()));
        }
        lines.extend(
            cells
                .iter()
                .map(|c| format!("cell {}: {} epochs", cell_name(c), c.epochs)),
        );
        lines.push(format!("output: {}", ctx.out.display()));
        print_plan("finetune", &lines, &cfg.to_toml()?);
        return Ok(());
    }

    std::fs::create_dir_all(&ctx.out)?;
    write(&ctx.out, "config.toml", cfg.to_toml()?)?;
    let grid = cells.len() > 1 || !cfg.grid.is_empty();
    let mut best: Option<(f64, usize, WeightStore, FinetuneLog, EvalReport)> = None;
    let mut summaries = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let name = cell_name(cell);
        log::info!("fine-tuning {} cell {name}", cfg.task.kind.name());
        let outcome = tasks::train(
            &cfg.task,
            &train,
            &dev,
            intermediate.as_ref(),
            &init,
            &vocab,
            cell,
        )?;
        let dev_score = outcome.report.micro.primary();
        log::info!(
            "cell {name}: best epoch {} dev {} {:.4}",
            outcome.log.best_epoch,
            primary_name(cfg.task.kind),
            dev_score
        );
        if grid {
            let dir = ctx.out.join("cells").join(&name);
            write(&dir, "report.json", outcome.report.to_json()?)?;
            write(&dir, "report.txt", outcome.report.to_table())?;
            write(
                &dir,
                "log.json",
                serde_json::to_string_pretty(&outcome.log)?,
            )?;
        }
        summaries.push(CellSummary {
            cell: name,
            batch_size: cell.batch_size,
            learning_rate: cell.learning_rate,
            best_epoch: outcome.log.best_epoch,
            dev: dev_score,
        });
        // ties keep the earlier cell
        if best.as_ref().is_none_or(|b| dev_score > b.0) {
            best = Some((dev_score, i, outcome.weights, outcome.log, outcome.report));
        }
    }
    let (_, best_index, weights, log, report) = best.expect("at least one cell");
    save_checkpoint_path(&weights, ctx.out.join("model.mbrt"))?;
    write(&ctx.out, "report.json", report.to_json()?)?;
    write(&ctx.out, "report.txt", report.to_table())?;
    write(&ctx.out, "log.json", serde_json::to_string_pretty(&log)?)?;
    if grid {
        let summary = GridSummary {
            metric: primary_name(cfg.task.kind),
            best: summaries[best_index].cell.clone(),
            cells: summaries,
        };
        write(
            &ctx.out,
            "grid.json",
            serde_json::to_string_pretty(&summary)?,
        )?;
    }
    print!("dev\n{}", report.to_table());
    if let Some(test) = &test {
        let best_cell = &cells[best_index];
        let report = test_report(&weights, &vocab, test, best_cell, cfg)?;
        write(&ctx.out, "test_report.json", report.to_json()?)?;
        write(&ctx.out, "test_report.txt", report.to_table())?;
        print!("test\n{}", report.to_table());
    }
    Ok(())
}

fn test_report(
    weights: &WeightStore,
    vocab: &Vocabulary,
    test: &Dataset,
    cell: &FinetuneConfig,
    cfg: &RunConfig,
) -> Result<EvalReport> {
    let metrics = tasks::evaluate(weights, vocab, test, cell)?;
    let mut provenance = BTreeMap::new();
    provenance.insert("selection".into(), "best dev epoch and cell".into());
    EvalReport::new(
        cfg.task.kind,
        vec![DatasetResult {
            name: "test".into(),
            metrics,
            folds: None,
            split: None,
        }],
        provenance,
        fingerprint_text(&cfg.to_toml()?),
        cell.n_best,
    )
}
