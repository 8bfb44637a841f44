use crate::encoder::{affine, argmax, Tensor, WeightStore};
use crate::error::{Error, Result};
use crate::tags::{repair_bioes, OUTSIDE};
use crate::tokenizer::{char_slice, EncodedInput};

use super::scheme::TagScheme;

/// A single output layer: `(hidden, outputs)` weight plus bias.
#[derive(Debug, Clone, Copy)]
pub struct Head<'a> {
    pub weight: &'a [f32],
    pub bias: &'a [f32],
    pub hidden: usize,
    pub outputs: usize,
}

impl<'a> Head<'a> {
    pub fn new(weight: &'a Tensor<f32>, bias: &'a Tensor<f32>) -> Result<Self> {
        match (weight.shape(), bias.shape()) {
            ([h, c], [cb]) if c == cb => Ok(Head {
                weight: weight.data(),
                bias: bias.data(),
                hidden: *h,
                outputs: *c,
            }),
            (w, b) => Err(Error::Consistency(format!(
                "head shapes {w:?} and {b:?} do not agree"
            ))),
        }
    }

    /// The head stored under `head.<task>.weight` / `head.<task>.bias`.
    pub fn from_store(store: &'a WeightStore, task: &str) -> Result<Self> {
        let (w, b) = head_names(task);
        match (store.get(&w), store.get(&b)) {
            (Some(w), Some(b)) => Self::new(w, b),
            _ => Err(Error::Transfer(format!("checkpoint has no {task} head"))),
        }
    }

    /// Logits for `rows` stacked hidden vectors.
    pub fn apply(&self, hidden: &[f32], rows: usize) -> Vec<f32> {
        affine(
            hidden,
            self.weight,
            self.bias,
            rows,
            self.hidden,
            self.outputs,
        )
    }
}

pub fn head_names(task: &str) -> (String, String) {
    (format!("head.{task}.weight"), format!("head.{task}.bias"))
}

/// Tag logits for each of the `n` positions in `hidden` (`n × H`).
pub fn ner_forward(hidden: &[f32], n: usize, head: &Head) -> Vec<Vec<f32>> {
    head.apply(hidden, n)
        .chunks(head.outputs)
        .map(<[f32]>::to_vec)
        .collect()
}

/// Word-level BIOES tags: argmax at each word's first subtoken, then the
/// transition repair. Words lost to truncation are tagged `O`.
pub fn ner_decode(
    logits: &[Vec<f32>],
    encoded: &EncodedInput,
    n_words: usize,
    scheme: &TagScheme,
) -> Vec<String> {
    let raw: Vec<&str> = encoded
        .first_subtokens(0, n_words)
        .into_iter()
        .map(|pos| match pos.and_then(|p| logits.get(p)) {
            Some(row) => scheme.tag(argmax(row)),
            None => OUTSIDE,
        })
        .collect();
    repair_bioes(&raw)
}

/// Class logits `(B, |labels|)` from pooled `[CLS]` vectors `(B, H)`.
pub fn re_forward(pooled: &Tensor<f32>, head: &Head) -> Result<Tensor<f32>> {
    let b = pooled.shape()[0];
    Tensor::from_vec(&[b, head.outputs], head.apply(pooled.data(), b))
}

/// Start and end logits per position.
pub fn qa_forward(hidden: &[f32], n: usize, head: &Head) -> (Vec<f32>, Vec<f32>) {
    debug_assert_eq!(head.outputs, 2);
    let logits = head.apply(hidden, n);
    let start = logits.iter().step_by(2).copied().collect();
    let end = logits.iter().skip(1).step_by(2).copied().collect();
    (start, end)
}

/// A scored answer span over subtoken positions `start..=end`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanCandidate {
    pub start: usize,
    pub end: usize,
    pub score: f32,
    pub text: String,
    /// Character range in the passage.
    pub chars: (usize, usize),
}

fn admissible(encoded: &EncodedInput, pos: usize) -> bool {
    encoded.segments[pos] == 1 && encoded.mask[pos] == 1 && encoded.word_index[pos].is_some()
}

/// Every admissible `(i, j)` with `i <= j < i + max_answer_subtokens`,
/// ranked by `start[i] + end[j]` (ties: lower `i`, then lower `j`),
/// truncated to `n_best`.
pub fn extract_span(
    start: &[f32],
    end: &[f32],
    encoded: &EncodedInput,
    passage: &str,
    max_answer_subtokens: usize,
    n_best: usize,
) -> Result<Vec<SpanCandidate>> {
    let n = start.len().min(end.len()).min(encoded.len());
    let positions: Vec<usize> = (0..n).filter(|&p| admissible(encoded, p)).collect();
    let mut scored: Vec<(f32, usize, usize)> = Vec::new();
    for (a, &i) in positions.iter().enumerate() {
        for &j in &positions[a..] {
            if j - i + 1 > max_answer_subtokens {
                break;
            }
            scored.push((start[i] + end[j], i, j));
        }
    }
    if scored.is_empty() {
        return Err(Error::NoAnswer);
    }
    scored.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    scored.truncate(n_best.max(1));
    Ok(scored
        .into_iter()
        .map(|(score, i, j)| {
            let chars = (encoded.offsets[i].0, encoded.offsets[j].1);
            SpanCandidate {
                start: i,
                end: j,
                score,
                text: char_slice(passage, chars.0, chars.1).to_string(),
                chars,
            }
        })
        .collect())
}
