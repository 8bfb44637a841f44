//! Task heads (token tagging, `[CLS]` classification, span extraction) and
//! their fine-tuning loops.

mod anonymize;
mod config;
mod finetune;
mod forward;
mod objective;
mod scheme;

pub use crate::data::{filter_unanswerable, RelationLabelSet};
pub use anonymize::{anonymize_entities, DEFAULT_TAG_FORMAT};
pub use config::{FinetuneConfig, BATCH_SIZE_GRID, LEARNING_RATE_GRID};
pub use finetune::*;
pub use forward::{
    extract_span, head_names, ner_decode, ner_forward, qa_forward, re_forward, Head, SpanCandidate,
};
pub use objective::{task_objective, Target, TrainItem};
pub use scheme::{align_labels, TagScheme};
