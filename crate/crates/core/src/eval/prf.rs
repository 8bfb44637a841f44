use std::collections::BTreeSet;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::spans::EntitySpan;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

impl Prf {
    /// Metrics from raw counts. `0/0` gives `0`, except that a run with no
    /// gold and no predicted items at all scores `1` everywhere.
    pub fn from_counts(counts: Counts) -> Self {
        let Counts { tp, fp, fn_ } = counts;
        if tp + fp + fn_ == 0 {
            return Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                counts,
            };
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            counts,
        }
    }
}

/// Exact-match entity scoring, summed over sentences.
pub fn entity_prf(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> Result<Prf> {
    if gold.len() != pred.len() {
        return Err(Error::input(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut counts = Counts::default();
    for (g, p) in gold.iter().zip(pred) {
        let g: BTreeSet<&EntitySpan> = g.iter().collect();
        let p: BTreeSet<&EntitySpan> = p.iter().collect();
        let tp = g.intersection(&p).count();
        counts += Counts {
            tp,
            fp: p.len() - tp,
            fn_: g.len() - tp,
        };
    }
    Ok(Prf::from_counts(counts))
}

/// Pool counts across datasets, then score once.
pub fn micro_average(counts: &[Counts]) -> Prf {
    Prf::from_counts(counts.iter().copied().fold(Counts::default(), Add::add))
}

/// Micro P/R/F1 over the labels in `positive`.
pub fn classification_prf<S: AsRef<str>>(gold: &[S], pred: &[S], positive: &[S]) -> Result<Prf> {
    if gold.len() != pred.len() {
        return Err(Error::input(format!(
            "{} gold labels but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let is_pos = |l: &str| positive.iter().any(|p| p.as_ref() == l);
    let mut counts = Counts::default();
    for (g, p) in gold.iter().zip(pred) {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g == p {
            if is_pos(p) {
                counts.tp += 1;
            }
            continue;
        }
        if is_pos(p) {
            counts.fp += 1;
        }
        if is_pos(g) {
            counts.fn_ += 1;
        }
    }
    Ok(Prf::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn entity_examples() {
        let gold = vec![vec![EntitySpan::new(0, 1, "D"), EntitySpan::new(3, 3, "G")]];
        let pred = vec![vec![EntitySpan::new(0, 1, "D")]];
        let m = entity_prf(&gold, &pred).unwrap();
        assert!(close(m.precision, 1.0) && close(m.recall, 0.5) && close(m.f1, 2.0 / 3.0));

        let m = entity_prf(
            &[vec![EntitySpan::new(0, 1, "D")]],
            &[vec![EntitySpan::new(0, 2, "D")]],
        )
        .unwrap();
        assert_eq!(
            m.counts,
            Counts {
                tp: 0,
                fp: 1,
                fn_: 1
            }
        );
        assert_eq!(m.f1, 0.0);

        let m = entity_prf(&[vec![], vec![]], &[vec![], vec![]]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        assert!(entity_prf(&[vec![]], &[]).is_err());
    }

    #[test]
    fn micro() {
        let a = Counts {
            tp: 1,
            fp: 0,
            fn_: 1,
        };
        let b = Counts {
            tp: 1,
            fp: 1,
            fn_: 0,
        };
        let m = micro_average(&[a, b]);
        assert!(
            close(m.precision, 2.0 / 3.0) && close(m.recall, 2.0 / 3.0) && close(m.f1, 2.0 / 3.0)
        );
        assert_eq!(micro_average(&[a]), Prf::from_counts(a));
    }

    #[test]
    fn classification() {
        let m = classification_prf(&["1", "0", "1"], &["1", "1", "0"], &["1"]).unwrap();
        assert_eq!(
            m.counts,
            Counts {
                tp: 1,
                fp: 1,
                fn_: 1
            }
        );
        assert!(close(m.f1, 0.5));
        let m = classification_prf(&["1", "0"], &["1", "0"], &["1"]).unwrap();
        assert_eq!(m.f1, 1.0);
        let m = classification_prf(&["1", "0"], &["0", "0"], &["1"]).unwrap();
        assert_eq!((m.recall, m.f1), (0.0, 0.0));
        assert!(classification_prf(&["1"], &[], &["1"]).is_err());
    }
}
