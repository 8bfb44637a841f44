use std::path::PathBuf;

use minibert::data::kfold_split;
use minibert::encoder::{load_checkpoint_path, WeightStore};
use minibert::eval::{
    fingerprint_text, DatasetResult, EvalReport, FoldSummary, Metrics, Prf, QaScores,
};
use minibert::rng::derive_seed;
use minibert::tokenizer::Vocabulary;
use minibert::{Error, Result};

use super::{print_plan, write};
use crate::config::{exists, require, EvalDataset, RunConfig};
use crate::tasks::{self, Dataset};
use crate::Ctx;

fn datasets(cfg: &RunConfig) -> Result<Vec<EvalDataset>> {
    if !cfg.eval.datasets.is_empty() {
        return Ok(cfg.eval.datasets.clone());
    }
    match &cfg.paths.test {
        Some(p) => Ok(vec![EvalDataset {
            name: "test".into(),
            path: p.clone(),
            predictions: None,
            split: None,
        }]),
        None => Err(Error::Config(
            "nothing to evaluate: set [[eval.datasets]] or paths.test".into(),
        )),
    }
}

enum Mode {
    Predictions(PathBuf),
    Model,
    Folds(usize),
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let sets = datasets(cfg)?;
    let mut plan = Vec::new();
    let mut needs_model = false;
    for d in &sets {
        exists(&d.path, &format!("dataset {}", d.name))?;
        let mode = match (&d.predictions, cfg.eval.folds) {
            (Some(p), _) => {
                exists(p, &format!("predictions for {}", d.name))?;
                Mode::Predictions(p.clone())
            }
            (None, 0) => Mode::Model,
            (None, 1) => return Err(Error::Config("eval.folds must be 0 or at least 2".into())),
            (None, k) => Mode::Folds(k),
        };
        needs_model |= !matches!(mode, Mode::Predictions(_));
        plan.push(mode);
    }
    let model = if needs_model {
        let vocab = Vocabulary::load_path(require(&cfg.paths.vocab, "vocab")?)?;
        let store = load_checkpoint_path(require(&cfg.paths.checkpoint, "checkpoint")?)?;
        if cfg.eval.folds >= 2 {
            cfg.finetune.validate()?;
        }
        Some((vocab, store))
    } else {
        None
    };
    let data: Vec<Dataset> = sets
        .iter()
        .map(|d| tasks::load(&d.path, &cfg.task))
        .collect::<Result<_>>()?;

    if ctx.dry_run {
        let lines: Vec<String> = sets
            .iter()
            .zip(&plan)
            .zip(&data)
            .map(|((d, m), x)| {
                let how = match m {
                    Mode::Predictions(p) => format!("score {}", p.display()),
                    Mode::Model => "run the fine-tuned model".into(),
                    Mode::Folds(k) => format!("{k}-fold fine-tuning"),
                };
                format!("{} ({} examples): {how}", d.name, x.len())
            })
            .collect();
        print_plan("evaluate", &lines, &cfg.to_toml()?);
        return Ok(());
    }

    let mut results = Vec::new();
    for ((d, mode), gold) in sets.iter().zip(&plan).zip(&data) {
        let (metrics, folds) = match mode {
            Mode::Predictions(p) => (
                tasks::score_predictions(gold, p, &cfg.task, cfg.finetune.n_best)?,
                None,
            ),
            Mode::Model => {
                let (vocab, store) = model.as_ref().unwrap();
                let mut ft = cfg.finetune.clone();
                // inputs never need to be longer than the model can take
                ft.max_len = ft.max_len.min(store.config.max_positions);
                (tasks::evaluate(store, vocab, gold, &ft)?, None)
            }
            Mode::Folds(k) => {
                let (vocab, store) = model.as_ref().unwrap();
                let summary = cross_validate(cfg, &d.name, gold, *k, store, vocab)?;
                (summary.pooled.clone(), Some(summary))
            }
        };
        log::info!(
            "{}: {} {:.4}",
            d.name,
            super::finetune::primary_name(cfg.task.kind),
            metrics.primary()
        );
        results.push(DatasetResult {
            name: d.name.clone(),
            metrics,
            folds,
            split: d.split.clone(),
        });
    }
    let mut provenance = cfg.eval.provenance.clone();
    if cfg.eval.folds >= 2 {
        provenance.insert(
            "folds".into(),
            format!(
                "{}-fold; headline metrics pool the fold counts, per-fold means under folds.mean; each fold selects its epoch on its own training folds",
                cfg.eval.folds
            ),
        );
    }
    let report = EvalReport::new(
        cfg.task.kind,
        results,
        provenance,
        fingerprint_text(&cfg.to_toml()?),
        cfg.finetune.n_best,
    )?;
    write(&ctx.out, "report.json", report.to_json()?)?;
    write(&ctx.out, "report.txt", report.to_table())?;
    print!("{}", report.to_table());
    Ok(())
}

fn cross_validate(
    cfg: &RunConfig,
    name: &str,
    data: &Dataset,
    k: usize,
    init: &WeightStore,
    vocab: &Vocabulary,
) -> Result<FoldSummary> {
    let split_seed = derive_seed(cfg.seed, &format!("eval.folds.{name}"));
    let mut per_fold = Vec::new();
    for (f, (train_idx, test_idx)) in kfold_split(data.len(), k, split_seed)?
        .into_iter()
        .enumerate()
    {
        let train = data.select(&train_idx);
        let test = data.select(&test_idx);
        let mut ft = cfg.finetune.clone();
        ft.seed = derive_seed(cfg.finetune.seed, &format!("eval.fold.{f}"));
        let outcome = tasks::train(&cfg.task, &train, &train, None, init, vocab, &ft)?;
        let m = tasks::evaluate(&outcome.weights, vocab, &test, &ft)?;
        log::info!("{name} fold {}/{k}: {:.4}", f + 1, m.primary());
        per_fold.push(m);
    }
    match &per_fold[0] {
        Metrics::Prf { .. } => FoldSummary::prf(
            &per_fold
                .iter()
                .map(|m| match m {
                    Metrics::Prf { counts, .. } => Prf::from_counts(*counts),
                    _ => unreachable!(),
                })
                .collect::<Vec<_>>(),
        ),
        Metrics::Qa { .. } => FoldSummary::qa(
            &per_fold
                .iter()
                .map(|m| match m {
                    Metrics::Qa { counts, .. } => {
                        QaScores::from_counts(counts.clone(), cfg.finetune.n_best)
                    }
                    _ => unreachable!(),
                })
                .collect::<Vec<_>>(),
            cfg.finetune.n_best,
        ),
    }
}
