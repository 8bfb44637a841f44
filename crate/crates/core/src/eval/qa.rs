use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N_BEST: usize = 5;

/// Answer normalization shared by answer search and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalizer {
    pub case_fold: bool,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer { case_fold: true }
    }
}

impl Normalizer {
    /// Fold case (if enabled), collapse whitespace, trim, and strip ASCII
    /// punctuation from both ends.
    pub fn apply(&self, s: &str) -> String {
        let (mut out, _) = self.map_text(s);
        loop {
            let trimmed = out.trim_matches(|c: char| c.is_ascii_punctuation()).trim();
            if trimmed.len() == out.len() {
                return out;
            }
            out = trimmed.to_string();
        }
    }

    /// Fold case and collapse whitespace runs (leading and trailing runs are
    /// dropped), returning for each output char the index of the input char
    /// it came from.
    pub fn map_text(&self, s: &str) -> (String, Vec<usize>) {
        let mut out = String::with_capacity(s.len());
        let mut origin = Vec::with_capacity(s.len());
        let mut pending_space: Option<usize> = None;
        for (i, c) in s.chars().enumerate() {
            if c.is_whitespace() {
                if !out.is_empty() && pending_space.is_none() {
                    pending_space = Some(i);
                }
                continue;
            }
            if let Some(at) = pending_space.take() {
                out.push(' ');
                origin.push(at);
            }
            if self.case_fold {
                for lc in c.to_lowercase() {
                    out.push(lc);
                    origin.push(i);
                }
            } else {
                out.push(c);
                origin.push(i);
            }
        }
        (out, origin)
    }
}

/// [`Normalizer::apply`] with case folding on.
pub fn normalize_answer(s: &str) -> String {
    Normalizer::default().apply(s)
}

/// 1-based rank of the first answer matching any gold string, within the
/// first `n_best` answers.
pub fn rank_of<S: AsRef<str>, G: AsRef<str>>(
    ranked: &[S],
    gold: &[G],
    normalizer: &dyn Fn(&str) -> String,
    n_best: usize,
) -> Option<usize> {
    let gold: Vec<String> = gold.iter().map(|g| normalizer(g.as_ref())).collect();
    ranked
        .iter()
        .take(n_best)
        .position(|a| gold.contains(&normalizer(a.as_ref())))
        .map(|p| p + 1)
}

/// Per-question rank tallies. `at_rank[r - 1]` counts questions answered at rank `r`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaCounts {
    pub questions: usize,
    pub at_rank: Vec<usize>,
    pub unranked: usize,
}

impl QaCounts {
    pub fn record(&mut self, rank: Option<usize>) {
        self.questions += 1;
        match rank {
            Some(r) => {
                if self.at_rank.len() < r {
                    self.at_rank.resize(r, 0);
                }
                self.at_rank[r - 1] += 1;
            }
            None => self.unranked += 1,
        }
    }
}

impl Add for QaCounts {
    type Output = QaCounts;
    fn add(mut self, o: QaCounts) -> QaCounts {
        self += o;
        self
    }
}

impl AddAssign for QaCounts {
    fn add_assign(&mut self, o: QaCounts) {
        self.questions += o.questions;
        self.unranked += o.unranked;
        if self.at_rank.len() < o.at_rank.len() {
            self.at_rank.resize(o.at_rank.len(), 0);
        }
        for (a, b) in self.at_rank.iter_mut().zip(&o.at_rank) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaScores {
    pub strict: f64,
    pub lenient: f64,
    pub mrr: f64,
    pub counts: QaCounts,
}

impl QaScores {
    /// Scores from tallies; lenient counts ranks up to `n_best`. Zero
    /// questions score zero.
    pub fn from_counts(counts: QaCounts, n_best: usize) -> Self {
        let q = counts.questions;
        if q == 0 {
            return QaScores {
                strict: 0.0,
                lenient: 0.0,
                mrr: 0.0,
                counts,
            };
        }
        let first = counts.at_rank.first().copied().unwrap_or(0);
        let within: usize = counts.at_rank.iter().take(n_best).sum();
        let reciprocal: f64 = counts
            .at_rank
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 / (i + 1) as f64)
            .sum();
        QaScores {
            strict: first as f64 / q as f64,
            lenient: within as f64 / q as f64,
            mrr: reciprocal / q as f64,
            counts,
        }
    }
}

/// Strict accuracy, lenient accuracy and MRR over questions.
pub fn qa_metrics<S: AsRef<str>, G: AsRef<str>>(
    ranked: &[Vec<S>],
    gold: &[Vec<G>],
    normalizer: &dyn Fn(&str) -> String,
    n_best: usize,
) -> Result<QaScores> {
    if ranked.len() != gold.len() {
        return Err(Error::input(format!(
            "{} ranked lists for {} questions",
            ranked.len(),
            gold.len()
        )));
    }
    if n_best == 0 {
        return Err(Error::config("n_best must be at least 1"));
    }
    let mut counts = QaCounts::default();
    for (r, g) in ranked.iter().zip(gold) {
        if g.is_empty() {
            return Err(Error::input("question without gold answers"));
        }
        counts.record(rank_of(r, g, normalizer, n_best));
    }
    Ok(QaScores::from_counts(counts, n_best))
}
