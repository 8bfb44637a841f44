//! Entity-level, classification and ranked-answer metrics, plus the
//! evaluation report.

mod prf;
mod qa;
mod report;
mod spans;

pub use prf::{classification_prf, entity_prf, micro_average, Counts, Prf};
pub use qa::{
    normalize_answer, qa_metrics, rank_of, Normalizer, QaCounts, QaScores, DEFAULT_N_BEST,
};
pub use report::{fingerprint_text, DatasetResult, EvalReport, FoldSummary, Metrics, TaskKind};
pub use spans::{spans_from_tags, EntitySpan};
