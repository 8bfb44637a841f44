use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledSentence, QAExample, RelationExample, RelationLabelSet};
use crate::encoder::{
    argmax, init_tensor, zeros_like, Dropout, Encoder, Params, Tensor, WeightStore, HEAD_PREFIX,
};
use crate::error::{Error, Result};
use crate::eval::{
    classification_prf, entity_prf, fingerprint_text, qa_metrics, spans_from_tags, DatasetResult,
    EvalReport, Metrics, Normalizer, TaskKind,
};
use crate::optim::{AdamW, LinearSchedule};
use crate::rng::{derive_seed, substream};
use crate::tokenizer::{encode_sequence, encode_windows, encode_words, EncodedInput, Vocabulary};

use super::config::FinetuneConfig;
use super::forward::{
    extract_span, head_names, ner_decode, ner_forward, qa_forward, Head, SpanCandidate,
};
use super::objective::{task_objective, Target, TrainItem};
use super::scheme::{align_labels, TagScheme};

const NER: &str = "ner";
const RE: &str = "re";
const QA: &str = "qa";
const TAGS_KEY: &str = "head.ner.tags";
const LABELS_KEY: &str = "head.re.labels";

/// Training and development data for one task.
#[derive(Debug, Clone, Copy)]
pub enum TaskData<'a> {
    Ner {
        train: &'a [LabeledSentence],
        dev: &'a [LabeledSentence],
        /// Defaults to the entity types found in `train` and `dev`.
        scheme: Option<&'a TagScheme>,
    },
    Re {
        train: &'a [RelationExample],
        dev: &'a [RelationExample],
        labels: &'a RelationLabelSet,
    },
    Qa {
        /// Optional first phase on a generic span dataset.
        intermediate: Option<&'a [QAExample]>,
        train: &'a [QAExample],
        dev: &'a [QAExample],
    },
}

impl TaskData<'_> {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskData::Ner { .. } => TaskKind::Ner,
            TaskData::Re { .. } => TaskKind::Re,
            TaskData::Qa { .. } => TaskKind::Qa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub name: String,
    /// Global optimizer steps covered, `first_step..=last_step`.
    pub first_step: usize,
    pub last_step: usize,
    pub epochs: usize,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: String,
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f32,
    /// Dev F1 (NER, RE) or MRR (QA); absent in phases without selection.
    pub dev: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinetuneLog {
    pub phases: Vec<PhaseRecord>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    /// Best-dev checkpoint with its head under `head.<task>.*`.
    pub weights: WeightStore,
    /// Dev evaluation of `weights`.
    pub report: EvalReport,
    pub log: FinetuneLog,
}

/// Fine-tune the encoder and a fresh task head end to end, selecting the
/// epoch with the best dev metric (ties keep the earlier epoch).
pub fn finetune(
    task: TaskData<'_>,
    init: &WeightStore,
    vocab: &Vocabulary,
    config: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    config.validate()?;
    check_vocab(init, vocab)?;
    if config.max_len > init.config.max_positions {
        return Err(Error::config(format!(
            "max_len {} exceeds the encoder's {} positions",
            config.max_len, init.config.max_positions
        )));
    }
    let mut store = init.clone();
    store.tensors.retain(|k, _| !k.starts_with(HEAD_PREFIX));
    store.metadata.retain(|k, _| !k.starts_with(HEAD_PREFIX));

    match task {
        TaskData::Ner { train, dev, scheme } => {
            let scheme = match scheme {
                Some(s) => s.clone(),
                None => {
                    let all: Vec<LabeledSentence> = train.iter().chain(dev).cloned().collect();
                    TagScheme::from_sentences(&all)?
                }
            };
            store
                .metadata
                .insert(TAGS_KEY.into(), serde_json::to_string(scheme.tags())?);
            add_head(&mut store, NER, scheme.len(), config);
            let items = ner_items(train, &scheme, vocab, config.max_len)?;
            let eval = |s: &WeightStore| -> Result<Metrics> {
                Ok(evaluate_ner(s, vocab, dev, config.max_len)?.into())
            };
            run_phases(
                store,
                NER,
                vec![("target", items, true)],
                &eval,
                config,
                TaskKind::Ner,
            )
        }
        TaskData::Re { train, dev, labels } => {
            store
                .metadata
                .insert(LABELS_KEY.into(), serde_json::to_string(&labels.labels)?);
            add_head(&mut store, RE, labels.len(), config);
            let items = re_items(train, labels, vocab, config.max_len)?;
            let eval = |s: &WeightStore| -> Result<Metrics> {
                Ok(evaluate_re(s, vocab, dev, config.max_len)?.into())
            };
            run_phases(
                store,
                RE,
                vec![("target", items, true)],
                &eval,
                config,
                TaskKind::Re,
            )
        }
        TaskData::Qa {
            intermediate,
            train,
            dev,
        } => {
            add_head(&mut store, QA, 2, config);
            let mut phases = Vec::new();
            if let Some(inter) = intermediate {
                phases.push(("intermediate", qa_items(inter, vocab, config)?, false));
            }
            phases.push(("target", qa_items(train, vocab, config)?, true));
            let eval = |s: &WeightStore| -> Result<Metrics> {
                Ok(evaluate_qa(s, vocab, dev, config, &Normalizer::default())?.into())
            };
            run_phases(store, QA, phases, &eval, config, TaskKind::Qa)
        }
    }
}

fn check_vocab(store: &WeightStore, vocab: &Vocabulary) -> Result<()> {
    match &store.vocab_fingerprint {
        Some(f) if *f == vocab.fingerprint() && store.config.vocab_size == vocab.len() => Ok(()),
        Some(f) => Err(Error::Transfer(format!(
            "checkpoint vocabulary {f} does not match the tokenizer's {}",
            vocab.fingerprint()
        ))),
        None => Err(Error::Transfer(
            "checkpoint carries no vocabulary fingerprint".into(),
        )),
    }
}

fn add_head(store: &mut WeightStore, task: &str, outputs: usize, config: &FinetuneConfig) {
    let (w, b) = head_names(task);
    let h = store.config.hidden;
    let seed = derive_seed(config.seed, "finetune.init");
    store.tensors.insert(
        w.clone(),
        init_tensor(&w, &[h, outputs], seed, config.head_init_std as f64),
    );
    store.tensors.insert(b, Tensor::zeros(&[outputs]));
}

type Phase = (&'static str, Vec<TrainItem>, bool);

fn run_phases(
    mut store: WeightStore,
    task: &str,
    phases: Vec<Phase>,
    evaluate: &dyn Fn(&WeightStore) -> Result<Metrics>,
    config: &FinetuneConfig,
    kind: TaskKind,
) -> Result<FinetuneOutcome> {
    let mut log = FinetuneLog::default();
    let mut order_rng = substream(config.seed, "finetune.order");
    let mut dropout_rng = substream(config.seed, "finetune.dropout");
    let mut step = 0;
    let mut best: Option<(f64, WeightStore, Metrics)> = None;
    for (name, items, select) in phases {
        if items.is_empty() {
            return Err(Error::input(format!("{name} phase has no training items")));
        }
        let per_epoch = items.len().div_ceil(config.batch_size);
        let schedule = LinearSchedule::new(
            config.learning_rate,
            per_epoch * config.epochs,
            config.warmup_fraction,
        );
        let mut optimizer = AdamW::new(config.optimizer.clone(), &store.tensors);
        let first_step = step + 1;
        let mut order: Vec<usize> = (0..items.len()).collect();
        for epoch in 1..=config.epochs {
            order.shuffle(&mut order_rng);
            let mut loss_sum = 0.0;
            for (b, chunk) in order.chunks(config.batch_size).enumerate() {
                let batch: Vec<&TrainItem> = chunk.iter().map(|&i| &items[i]).collect();
                let mut grads: Params<f32> = zeros_like(&store.tensors);
                let mut dropout = Dropout {
                    rate: config.dropout,
                    rng: &mut dropout_rng,
                };
                let loss = task_objective(
                    &store.config,
                    &store.tensors,
                    task,
                    &batch,
                    Some(&mut dropout),
                    Some(&mut grads),
                )?;
                if !loss.is_finite() {
                    return Err(Error::Consistency(format!(
                        "non-finite {task} loss at step {}",
                        step + 1
                    )));
                }
                loss_sum += loss;
                step += 1;
                let local = (epoch - 1) * per_epoch + b + 1;
                optimizer.update(&mut store.tensors, &grads, schedule.rate(local));
            }
            let train_loss = loss_sum / per_epoch as f32;
            let dev = if select {
                let m = evaluate(&store)?;
                let score = m.primary();
                if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                    best = Some((score, store.clone(), m));
                    log.best_epoch = epoch;
                }
                Some(score)
            } else {
                None
            };
            log::info!("{task} {name} epoch {epoch}: loss {train_loss:.4} dev {dev:?}");
            log.epochs.push(EpochRecord {
                phase: name.into(),
                epoch,
                step,
                train_loss,
                dev,
            });
        }
        log::info!("{task} phase {name} covered steps {first_step}..={step}");
        log.phases.push(PhaseRecord {
            name: name.into(),
            first_step,
            last_step: step,
            epochs: config.epochs,
            items: items.len(),
        });
    }
    let (weights, metrics) = match best {
        Some((_, w, m)) => (w, m),
        None => {
            let m = evaluate(&store)?;
            (store, m)
        }
    };
    let mut provenance = BTreeMap::new();
    provenance.insert(
        "selection".into(),
        format!("best dev epoch {} of {}", log.best_epoch, config.epochs),
    );
    let report = EvalReport::new(
        kind,
        vec![DatasetResult {
            name: "dev".into(),
            metrics,
            folds: None,
            split: None,
        }],
        provenance,
        fingerprint_text(&serde_json::to_string(config)?),
        config.n_best,
    )?;
    Ok(FinetuneOutcome {
        weights,
        report,
        log,
    })
}

fn ner_items(
    sentences: &[LabeledSentence],
    scheme: &TagScheme,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<TrainItem>> {
    sentences
        .iter()
        .map(|s| {
            let input = encode_words(&s.words, vocab, max_len)?;
            let target = Target::Tags(align_labels(s, &input, scheme)?);
            Ok(TrainItem { input, target })
        })
        .collect()
}

fn re_items(
    examples: &[RelationExample],
    labels: &RelationLabelSet,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<TrainItem>> {
    examples
        .iter()
        .map(|e| {
            let k = labels.id(&e.label).ok_or_else(|| {
                Error::input(format!(
                    "label {:?} of {} is not in the label set",
                    e.label, e.id
                ))
            })?;
            Ok(TrainItem {
                input: encode_sequence(&e.sentence, None, vocab, max_len)?,
                target: Target::Class(k),
            })
        })
        .collect()
}

/// Subtoken positions covering char range `[start, end)` in a window, if
/// the window holds the whole answer.
fn locate(input: &EncodedInput, start: usize, end: usize) -> Option<(usize, usize)> {
    let passage: Vec<usize> = (0..input.len())
        .filter(|&p| input.segments[p] == 1 && input.word_index[p].is_some())
        .collect();
    let first = *passage.first()?;
    let last = *passage.last()?;
    if input.offsets[first].0 > start || input.offsets[last].1 < end {
        return None;
    }
    let s = passage
        .iter()
        .copied()
        .find(|&p| input.offsets[p].1 > start)?;
    let e = passage
        .iter()
        .rev()
        .copied()
        .find(|&p| input.offsets[p].0 < end)?;
    (s <= e).then_some((s, e))
}

/// One item per window that contains the first gold answer.
fn qa_items(
    examples: &[QAExample],
    vocab: &Vocabulary,
    config: &FinetuneConfig,
) -> Result<Vec<TrainItem>> {
    let mut items = Vec::new();
    for ex in examples {
        let Some(answer) = ex.answers.first() else {
            continue;
        };
        let (start, end) = (answer.start, answer.start + answer.text.chars().count());
        for input in encode_windows(
            &ex.question,
            &ex.passage,
            vocab,
            config.max_len,
            config.doc_stride,
        )? {
            if let Some((s, e)) = locate(&input, start, end) {
                items.push(TrainItem {
                    input,
                    target: Target::Span(s, e),
                });
            }
        }
    }
    Ok(items)
}

/// Tag scheme recorded in a fine-tuned NER checkpoint.
pub fn scheme_from_store(store: &WeightStore) -> Result<TagScheme> {
    let tags: Vec<String> = store
        .metadata
        .get(TAGS_KEY)
        .ok_or_else(|| Error::Transfer("checkpoint has no NER tag set".into()))
        .and_then(|t| serde_json::from_str(t).map_err(Error::from))?;
    let types: Vec<&str> = tags.iter().filter_map(|t| t.strip_prefix("S-")).collect();
    let scheme = TagScheme::new(&types)?;
    if scheme.tags() != tags.as_slice() {
        return Err(Error::Corruption(
            "stored NER tag set is not in canonical order".into(),
        ));
    }
    Ok(scheme)
}

/// Relation labels recorded in a fine-tuned RE checkpoint.
pub fn labels_from_store(store: &WeightStore) -> Result<RelationLabelSet> {
    let labels: Vec<String> = store
        .metadata
        .get(LABELS_KEY)
        .ok_or_else(|| Error::Transfer("checkpoint has no relation label set".into()))
        .and_then(|t| serde_json::from_str(t).map_err(Error::from))?;
    RelationLabelSet::new(labels)
}

/// Word-level BIOES predictions for each sentence.
pub fn predict_ner(
    store: &WeightStore,
    vocab: &Vocabulary,
    sentences: &[LabeledSentence],
    max_len: usize,
) -> Result<Vec<Vec<String>>> {
    let scheme = scheme_from_store(store)?;
    let head = Head::from_store(store, NER)?;
    let encoder = Encoder::new(&store.config, &store.tensors);
    sentences
        .iter()
        .map(|s| {
            let input = encode_words(&s.words, vocab, max_len)?;
            let cache = encoder.forward_seq(&input, None)?;
            let logits = ner_forward(&cache.output, cache.n, &head);
            Ok(ner_decode(&logits, &input, s.words.len(), &scheme))
        })
        .collect()
}

pub fn evaluate_ner(
    store: &WeightStore,
    vocab: &Vocabulary,
    sentences: &[LabeledSentence],
    max_len: usize,
) -> Result<crate::eval::Prf> {
    let pred = predict_ner(store, vocab, sentences, max_len)?;
    let gold: Vec<_> = sentences
        .iter()
        .map(|s| spans_from_tags(&s.tags))
        .collect::<Result<_>>()?;
    let pred: Vec<_> = pred
        .iter()
        .map(|t| spans_from_tags(t))
        .collect::<Result<_>>()?;
    entity_prf(&gold, &pred)
}

pub fn predict_re(
    store: &WeightStore,
    vocab: &Vocabulary,
    examples: &[RelationExample],
    max_len: usize,
) -> Result<Vec<String>> {
    let labels = labels_from_store(store)?;
    let head = Head::from_store(store, RE)?;
    let encoder = Encoder::new(&store.config, &store.tensors);
    examples
        .iter()
        .map(|e| {
            let input = encode_sequence(&e.sentence, None, vocab, max_len)?;
            let cache = encoder.forward_seq(&input, None)?;
            let logits = head.apply(&cache.output[..store.config.hidden], 1);
            Ok(labels.labels[argmax(&logits)].clone())
        })
        .collect()
}

pub fn evaluate_re(
    store: &WeightStore,
    vocab: &Vocabulary,
    examples: &[RelationExample],
    max_len: usize,
) -> Result<crate::eval::Prf> {
    let labels = labels_from_store(store)?;
    let pred = predict_re(store, vocab, examples, max_len)?;
    let gold: Vec<String> = examples.iter().map(|e| e.label.clone()).collect();
    classification_prf(&gold, &pred, labels.positive())
}

/// Ranked answer texts per question: candidates from every window compared
/// by score, duplicates (after normalization) removed, cut to `n_best`.
pub fn predict_qa(
    store: &WeightStore,
    vocab: &Vocabulary,
    examples: &[QAExample],
    config: &FinetuneConfig,
    normalizer: &Normalizer,
) -> Result<Vec<Vec<String>>> {
    let head = Head::from_store(store, QA)?;
    let encoder = Encoder::new(&store.config, &store.tensors);
    examples
        .iter()
        .map(|ex| {
            let mut candidates: Vec<SpanCandidate> = Vec::new();
            for input in encode_windows(
                &ex.question,
                &ex.passage,
                vocab,
                config.max_len,
                config.doc_stride,
            )? {
                let cache = encoder.forward_seq(&input, None)?;
                let (start, end) = qa_forward(&cache.output, cache.n, &head);
                match extract_span(
                    &start,
                    &end,
                    &input,
                    &ex.passage,
                    config.max_answer_subtokens,
                    config.n_best,
                ) {
                    Ok(c) => candidates.extend(c),
                    Err(Error::NoAnswer) => {}
                    Err(e) => return Err(e),
                }
            }
            // stable: earlier windows win ties
            candidates.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut seen = Vec::new();
            let mut ranked = Vec::new();
            for c in candidates {
                let key = normalizer.apply(&c.text);
                if !seen.contains(&key) {
                    seen.push(key);
                    ranked.push(c.text);
                    if ranked.len() == config.n_best {
                        break;
                    }
                }
            }
            Ok(ranked)
        })
        .collect()
}

pub fn evaluate_qa(
    store: &WeightStore,
    vocab: &Vocabulary,
    examples: &[QAExample],
    config: &FinetuneConfig,
    normalizer: &Normalizer,
) -> Result<crate::eval::QaScores> {
    let ranked = predict_qa(store, vocab, examples, config, normalizer)?;
    let gold: Vec<Vec<String>> = examples
        .iter()
        .map(|e| e.answers.iter().map(|a| a.text.clone()).collect())
        .collect();
    qa_metrics(&ranked, &gold, &|s| normalizer.apply(s), config.n_best)
}
