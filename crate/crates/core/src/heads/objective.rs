use crate::encoder::{
    affine, affine_backward, cross_entropy_row, two_mut, Dropout, Encoder, EncoderConfig, Params,
    Real,
};
use crate::error::{Error, Result};
use crate::tokenizer::EncodedInput;

use super::forward::head_names;

/// Supervision for one encoded input.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Tag id per position; `None` is ignored.
    Tags(Vec<Option<usize>>),
    /// Class of the `[CLS]` vector.
    Class(usize),
    /// Answer start and end positions.
    Span(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub input: EncodedInput,
    pub target: Target,
}

/// Mean task loss over a batch, optionally accumulating gradients for the
/// encoder and the `head.<task>.*` tensors.
///
/// Tag loss is averaged over labeled positions, class loss over items, and
/// span loss over items with start and end weighted equally.
pub fn task_objective<T: Real>(
    cfg: &EncoderConfig,
    params: &Params<T>,
    task: &str,
    items: &[&TrainItem],
    mut dropout: Option<&mut Dropout<'_>>,
    mut grads: Option<&mut Params<T>>,
) -> Result<T> {
    let (wname, bname) = head_names(task);
    let (w, b) = match (params.get(&wname), params.get(&bname)) {
        (Some(w), Some(b)) => (w.data(), b.data()),
        _ => return Err(Error::Consistency(format!("no {task} head to train"))),
    };
    let h = cfg.hidden;
    let c = b.len();
    let encoder = Encoder::new(cfg, params);
    let weight = match items.first().map(|i| &i.target) {
        None => return Ok(T::zero()),
        Some(Target::Tags(_)) => {
            let labeled: usize = items
                .iter()
                .map(|i| match &i.target {
                    Target::Tags(t) => t.iter().filter(|x| x.is_some()).count(),
                    _ => 0,
                })
                .sum();
            if labeled == 0 {
                return Ok(T::zero());
            }
            T::one() / T::from_usize(labeled).unwrap()
        }
        Some(Target::Class(_)) => T::one() / T::from_usize(items.len()).unwrap(),
        Some(Target::Span(..)) => T::one() / T::from_usize(2 * items.len()).unwrap(),
    };
    let mut total = T::zero();
    for item in items {
        let cache = encoder.forward_seq(&item.input, dropout.as_deref_mut())?;
        let n = cache.n;
        // rows of the final hidden states the head reads
        let rows = if matches!(item.target, Target::Class(_)) {
            1
        } else {
            n
        };
        let x = &cache.output[..rows * h];
        let logits = affine(x, w, b, rows, h, c);
        let mut d_logits = vec![T::zero(); rows * c];
        match &item.target {
            Target::Tags(tags) => {
                for (pos, t) in tags.iter().enumerate().take(n) {
                    if let Some(t) = *t {
                        let r = pos * c..(pos + 1) * c;
                        total = total
                            + cross_entropy_row(&logits[r.clone()], t, weight, &mut d_logits[r]);
                    }
                }
            }
            Target::Class(k) => {
                total = total + cross_entropy_row(&logits, *k, weight, &mut d_logits);
            }
            Target::Span(s, e) => {
                if *s >= n || *e >= n {
                    return Err(Error::Consistency(format!(
                        "answer ({s}, {e}) beyond {n} positions"
                    )));
                }
                for (col, target) in [(0, *s), (1, *e)] {
                    let column: Vec<T> = (0..n).map(|i| logits[i * c + col]).collect();
                    let mut d_col = vec![T::zero(); n];
                    total = total + cross_entropy_row(&column, target, weight, &mut d_col);
                    for (i, g) in d_col.into_iter().enumerate() {
                        d_logits[i * c + col] = g;
                    }
                }
            }
        }
        if let Some(grads) = grads.as_deref_mut() {
            let dx = {
                let (dw, db) = two_mut(grads, &wname, &bname);
                affine_backward(x, w, &d_logits, rows, h, c, dw, db)
            };
            let mut d_out = vec![T::zero(); n * h];
            d_out[..rows * h].copy_from_slice(&dx);
            encoder.backward_seq(&cache, &d_out, grads);
        }
    }
    Ok(total * weight)
}
