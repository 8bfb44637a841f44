use std::io::Write;

use minibert::encoder::{load_checkpoint_path, save_checkpoint_path};
use minibert::pretrain::{planned_layout, Corpus, MlmTrainer};
use minibert::tokenizer::Vocabulary;
use minibert::Result;
use serde_json::json;

use super::{print_plan, write};
use crate::config::{exists, require};
use crate::Ctx;

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let vocab_path = require(&cfg.paths.vocab, "vocab")?;
    let corpus_path = require(&cfg.paths.corpus, "corpus")?;
    if let Some(init) = &cfg.paths.init {
        exists(init, "paths.init")?;
    }
    cfg.pretrain.validate()?;
    let mode = match &cfg.paths.init {
        Some(p) => format!("continued from {}", p.display()),
        None => "from scratch".to_string(),
    };
    let vocab = Vocabulary::load_path(&vocab_path)?;
    let corpus = Corpus::load_path(&corpus_path)?;
    let init = cfg
        .paths
        .init
        .as_ref()
        .map(load_checkpoint_path)
        .transpose()?;

    if ctx.dry_run {
        let mut lines = vec![
            format!("mode: {mode}"),
            format!("vocab: {} ({} tokens)", vocab_path.display(), vocab.len()),
            format!(
                "corpus: {} ({} documents, {} sentences)",
                corpus_path.display(),
                corpus.documents.len(),
                corpus.sentence_count()
            ),
            format!("steps: {}", cfg.pretrain.steps),
            format!("output: {}", ctx.out.display()),
        ];
        lines.extend(
            planned_layout(&cfg.pretrain, &vocab)
                .into_iter()
                .map(|(name, shape)| format!("tensor {name} {shape:?}")),
        );
        // trainer construction checks shapes and the vocabulary fingerprint
        MlmTrainer::new(&corpus, cfg.pretrain.clone(), &vocab, init.as_ref())?;
        print_plan("pretrain", &lines, &cfg.to_toml()?);
        return Ok(());
    }

    let trainer = MlmTrainer::new(&corpus, cfg.pretrain.clone(), &vocab, init.as_ref())?;
    log::info!("pretrain mode: {mode}");
    log::info!(
        "{} instances, {} steps of {}",
        trainer.instances().len(),
        cfg.pretrain.steps,
        cfg.pretrain.batch_size
    );
    std::fs::create_dir_all(&ctx.out)?;
    write(&ctx.out, "config.toml", cfg.to_toml()?)?;
    let mut metrics =
        std::io::BufWriter::new(std::fs::File::create(ctx.out.join("metrics.jsonl"))?);
    let total = cfg.pretrain.steps;
    let report_every = (total / 10).max(1);
    let started = std::time::Instant::now();
    let outcome = trainer.run(
        |r| {
            // wall clock stays out of the file so reruns are byte-identical
            let line = json!({
                "step": r.step,
                "loss": r.loss,
                "accuracy": r.accuracy,
                "learning_rate": r.learning_rate,
                "grad_norm": r.grad_norm,
            });
            writeln!(metrics, "{line}")?;
            if r.step % report_every == 0 || r.step == total {
                log::info!(
                    "step {}/{total} loss {:.4} acc {:.3} lr {:.2e}",
                    r.step,
                    r.loss,
                    r.accuracy,
                    r.learning_rate
                );
            }
            Ok(())
        },
        |step, w| {
            let name = format!("checkpoint-step{step}.mbrt");
            save_checkpoint_path(w, ctx.out.join(&name))?;
            log::info!("saved {name}");
            Ok(())
        },
    )?;
    metrics.flush()?;
    save_checkpoint_path(&outcome.weights, ctx.out.join("checkpoint.mbrt"))?;
    let last = outcome.log.last();
    let summary = json!({
        "mode": mode,
        "steps": outcome.log.len(),
        "final_loss": last.map(|r| r.loss),
        "final_accuracy": last.map(|r| r.accuracy),
        "checkpoints": outcome.checkpoints.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
        "vocab_fingerprint": vocab.fingerprint(),
    });
    write(
        &ctx.out,
        "summary.json",
        serde_json::to_string_pretty(&summary)?,
    )?;
    log::info!(
        "finished {} steps in {:.1}s; wrote {}",
        outcome.log.len(),
        started.elapsed().as_secs_f64(),
        ctx.out.join("checkpoint.mbrt").display()
    );
    Ok(())
}
