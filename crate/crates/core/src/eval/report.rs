use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::prf::{Counts, Prf};
use super::qa::{QaCounts, QaScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Ner,
    Re,
    Qa,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Ner => "ner",
            TaskKind::Re => "re",
            TaskKind::Qa => "qa",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ner" => Ok(TaskKind::Ner),
            "re" => Ok(TaskKind::Re),
            "qa" => Ok(TaskKind::Qa),
            other => Err(Error::config(format!("unknown task {other:?}"))),
        }
    }
}

/// Headline metric triple with its raw counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metrics {
    Prf {
        precision: f64,
        recall: f64,
        f1: f64,
        counts: Counts,
    },
    Qa {
        strict: f64,
        lenient: f64,
        mrr: f64,
        counts: QaCounts,
    },
}

impl From<Prf> for Metrics {
    fn from(m: Prf) -> Self {
        Metrics::Prf {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            counts: m.counts,
        }
    }
}

impl From<QaScores> for Metrics {
    fn from(m: QaScores) -> Self {
        Metrics::Qa {
            strict: m.strict,
            lenient: m.lenient,
            mrr: m.mrr,
            counts: m.counts,
        }
    }
}

impl Metrics {
    /// The three headline numbers in table order.
    pub fn triple(&self) -> [f64; 3] {
        match self {
            Metrics::Prf {
                precision,
                recall,
                f1,
                ..
            } => [*precision, *recall, *f1],
            Metrics::Qa {
                strict,
                lenient,
                mrr,
                ..
            } => [*strict, *lenient, *mrr],
        }
    }

    /// F1 for P/R/F1 metrics, MRR for ranked answers.
    pub fn primary(&self) -> f64 {
        self.triple()[2]
    }
}

/// Cross-validation aggregates: both the mean of per-fold metrics and the
/// metrics of the pooled counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub folds: usize,
    pub mean: [f64; 3],
    pub pooled: Metrics,
    pub per_fold: Vec<Metrics>,
}

impl FoldSummary {
    pub fn prf(folds: &[Prf]) -> Result<Self> {
        let pooled = Prf::from_counts(
            folds
                .iter()
                .map(|f| f.counts)
                .fold(Counts::default(), |a, b| a + b),
        );
        Self::build(folds.iter().map(|&f| f.into()).collect(), pooled.into())
    }

    pub fn qa(folds: &[QaScores], n_best: usize) -> Result<Self> {
        let counts = folds
            .iter()
            .fold(QaCounts::default(), |a, b| a + b.counts.clone());
        Self::build(
            folds.iter().map(|f| f.clone().into()).collect(),
            QaScores::from_counts(counts, n_best).into(),
        )
    }

    fn build(per_fold: Vec<Metrics>, pooled: Metrics) -> Result<Self> {
        if per_fold.is_empty() {
            return Err(Error::input("no folds to aggregate"));
        }
        let mut mean = [0.0; 3];
        for m in &per_fold {
            for (a, b) in mean.iter_mut().zip(m.triple()) {
                *a += b / per_fold.len() as f64;
            }
        }
        Ok(FoldSummary {
            folds: per_fold.len(),
            mean,
            pooled,
            per_fold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub name: String,
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<FoldSummary>,
    /// Where the split came from, as supplied by the user.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub datasets: Vec<DatasetResult>,
    /// Counts pooled over all datasets.
    pub counts: serde_json::Value,
    pub micro: Metrics,
    pub provenance: BTreeMap<String, String>,
    pub config_fingerprint: String,
}

impl EvalReport {
    /// Assemble a report; micro aggregates pool the datasets' counts.
    pub fn new(
        task: TaskKind,
        datasets: Vec<DatasetResult>,
        provenance: BTreeMap<String, String>,
        config_fingerprint: impl Into<String>,
        n_best: usize,
    ) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::input("report needs at least one dataset"));
        }
        let mut provenance = provenance;
        let micro: Metrics = match (task, &datasets[0].metrics) {
            (TaskKind::Qa, Metrics::Qa { .. }) => {
                let mut counts = QaCounts::default();
                for d in &datasets {
                    match &d.metrics {
                        Metrics::Qa { counts: c, .. } => counts += c.clone(),
                        _ => return Err(Error::input("mixed metric kinds in one report")),
                    }
                }
                provenance
                    .entry("pooling".into())
                    .or_insert_with(|| "questions pooled across datasets".into());
                QaScores::from_counts(counts, n_best).into()
            }
            (TaskKind::Ner | TaskKind::Re, Metrics::Prf { .. }) => {
                let mut counts = Counts::default();
                for d in &datasets {
                    match &d.metrics {
                        Metrics::Prf { counts: c, .. } => counts += *c,
                        _ => return Err(Error::input("mixed metric kinds in one report")),
                    }
                }
                provenance
                    .entry("pooling".into())
                    .or_insert_with(|| "tp/fp/fn summed across datasets".into());
                Prf::from_counts(counts).into()
            }
            _ => {
                return Err(Error::input(format!(
                    "metrics do not match task {}",
                    task.name()
                )))
            }
        };
        for d in &datasets {
            if let Some(split) = &d.split {
                provenance.insert(format!("split.{}", d.name), split.clone());
            }
        }
        let counts = match &micro {
            Metrics::Prf { counts, .. } => serde_json::to_value(counts)?,
            Metrics::Qa { counts, .. } => serde_json::to_value(counts)?,
        };
        Ok(EvalReport {
            task,
            datasets,
            counts,
            micro,
            provenance,
            config_fingerprint: config_fingerprint.into(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::format(format!("not an evaluation report: {e}")))
    }

    /// Aligned text table, one row per dataset plus the micro average, in percent.
    pub fn to_table(&self) -> String {
        let header = match self.task {
            TaskKind::Qa => ["S", "L", "MRR"],
            _ => ["P", "R", "F"],
        };
        let mut rows: Vec<(String, [f64; 3])> = self
            .datasets
            .iter()
            .map(|d| (d.name.clone(), d.metrics.triple()))
            .collect();
        rows.push(("micro".into(), self.micro.triple()));
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}",
            "Dataset", header[0], header[1], header[2]
        );
        let _ = writeln!(out, "{}", "-".repeat(width + 27));
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>7.2}  {:>7.2}  {:>7.2}",
                m[0] * 100.0,
                m[1] * 100.0,
                m[2] * 100.0
            );
        }
        out
    }
}

/// Short stable digest of a configuration rendering.
pub fn fingerprint_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
