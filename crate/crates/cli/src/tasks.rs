//! Task-generic loading, training and scoring.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use minibert::data::{
    parse_conll, parse_re_tsv, parse_squad, LabeledSentence, QAExample, RelationExample,
    RelationLabelSet, Scheme,
};
use minibert::encoder::WeightStore;
use minibert::eval::{
    classification_prf, entity_prf, qa_metrics, spans_from_tags, Metrics, Normalizer, TaskKind,
};
use minibert::heads::{
    evaluate_ner, evaluate_qa, evaluate_re, finetune, FinetuneConfig, FinetuneOutcome, TaskData,
};
use minibert::tokenizer::Vocabulary;
use minibert::{Error, Result};

use crate::config::TaskSection;

#[derive(Debug, Clone)]
pub enum Dataset {
    Ner(Vec<LabeledSentence>),
    Re(Vec<RelationExample>),
    Qa(Vec<QAExample>),
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn label_set(task: &TaskSection) -> Result<RelationLabelSet> {
    Ok(RelationLabelSet::new(task.labels.clone())?.with_placeholders(task.placeholders.clone()))
}

pub fn load(path: &Path, task: &TaskSection) -> Result<Dataset> {
    match task.kind {
        TaskKind::Ner => {
            let scheme = Scheme::parse(&task.scheme)?;
            let parsed = parse_conll(open(path)?, scheme, task.lenient)?;
            if parsed.repaired > 0 {
                log::warn!("{}: repaired {} sentences", path.display(), parsed.repaired);
            }
            Ok(Dataset::Ner(parsed.sentences))
        }
        TaskKind::Re => Ok(Dataset::Re(parse_re_tsv(open(path)?, &label_set(task)?)?)),
        TaskKind::Qa => Ok(Dataset::Qa(parse_squad(&read(path)?)?)),
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Ner(v) => v.len(),
            Dataset::Re(v) => v.len(),
            Dataset::Qa(v) => v.len(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
            idx.iter().map(|&i| v[i].clone()).collect()
        }
        match self {
            Dataset::Ner(v) => Dataset::Ner(pick(v, indices)),
            Dataset::Re(v) => Dataset::Re(pick(v, indices)),
            Dataset::Qa(v) => Dataset::Qa(pick(v, indices)),
        }
    }
}

pub fn train(
    task: &TaskSection,
    train: &Dataset,
    dev: &Dataset,
    intermediate: Option<&Dataset>,
    init: &WeightStore,
    vocab: &Vocabulary,
    config: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    let labels = label_set(task)?;
    let data = match (train, dev, intermediate) {
        (Dataset::Ner(train), Dataset::Ner(dev), _) => TaskData::Ner {
            train,
            dev,
            scheme: None,
        },
        (Dataset::Re(train), Dataset::Re(dev), _) => TaskData::Re {
            train,
            dev,
            labels: &labels,
        },
        (Dataset::Qa(train), Dataset::Qa(dev), inter) => TaskData::Qa {
            intermediate: match inter {
                Some(Dataset::Qa(v)) => Some(v),
                Some(_) => return Err(Error::Config("intermediate data must be QA".into())),
                None => None,
            },
            train,
            dev,
        },
        _ => {
            return Err(Error::Config(
                "train and dev sets are of different tasks".into(),
            ))
        }
    };
    finetune(data, init, vocab, config)
}

pub fn evaluate(
    store: &WeightStore,
    vocab: &Vocabulary,
    data: &Dataset,
    config: &FinetuneConfig,
) -> Result<Metrics> {
    Ok(match data {
        Dataset::Ner(v) => evaluate_ner(store, vocab, v, config.max_len)?.into(),
        Dataset::Re(v) => evaluate_re(store, vocab, v, config.max_len)?.into(),
        Dataset::Qa(v) => evaluate_qa(store, vocab, v, config, &Normalizer::default())?.into(),
    })
}

/// Score a prediction file against gold without a model. NER predictions
/// are a CoNLL file with the same words; relation predictions a TSV keyed by
/// id; QA predictions a JSON object from question id to a ranked answer list
/// (or a single answer).
pub fn score_predictions(
    gold: &Dataset,
    predictions: &Path,
    task: &TaskSection,
    n_best: usize,
) -> Result<Metrics> {
    match (gold, load_predictions(predictions, task)?) {
        (Dataset::Ner(g), Dataset::Ner(p)) => {
            if g.len() != p.len() || g.iter().zip(&p).any(|(a, b)| a.words != b.words) {
                return Err(Error::Input(format!(
                    "{}: predicted sentences do not match the gold words",
                    predictions.display()
                )));
            }
            let spans = |v: &[LabeledSentence]| -> Result<Vec<_>> {
                v.iter().map(|s| spans_from_tags(&s.tags)).collect()
            };
            Ok(entity_prf(&spans(g)?, &spans(&p)?)?.into())
        }
        (Dataset::Re(g), Dataset::Re(p)) => {
            let by_id: BTreeMap<&str, &str> = p
                .iter()
                .map(|e| (e.id.as_str(), e.label.as_str()))
                .collect();
            let pred = g
                .iter()
                .map(|e| {
                    by_id.get(e.id.as_str()).copied().ok_or_else(|| {
                        Error::Input(format!("no prediction for relation example {}", e.id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let gold: Vec<&str> = g.iter().map(|e| e.label.as_str()).collect();
            let labels = label_set(task)?;
            let positive: Vec<&str> = labels.positive().iter().map(String::as_str).collect();
            Ok(classification_prf(&gold, &pred, &positive)?.into())
        }
        (Dataset::Qa(g), Dataset::Qa(_)) => {
            let text = read(predictions)?;
            let map: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", predictions.display())))?;
            let ranked = g
                .iter()
                .map(|ex| match map.get(&ex.id) {
                    Some(serde_json::Value::String(s)) => Ok(vec![s.clone()]),
                    Some(serde_json::Value::Array(a)) => Ok(a
                        .iter()
                        .filter_map(|v| v.as_str().map(String::from))
                        .collect()),
                    Some(_) => Err(Error::Format(format!(
                        "prediction for {} is not text",
                        ex.id
                    ))),
                    None => Ok(Vec::new()),
                })
                .collect::<Result<Vec<_>>>()?;
            let gold: Vec<Vec<String>> = g
                .iter()
                .map(|e| e.answers.iter().map(|a| a.text.clone()).collect())
                .collect();
            let norm = Normalizer::default();
            Ok(qa_metrics(&ranked, &gold, &|s| norm.apply(s), n_best)?.into())
        }
        _ => unreachable!("load_predictions follows the task kind"),
    }
}

fn load_predictions(path: &Path, task: &TaskSection) -> Result<Dataset> {
    match task.kind {
        // QA predictions are read by the caller
        TaskKind::Qa => Ok(Dataset::Qa(Vec::new())),
        _ => load(path, task),
    }
}
