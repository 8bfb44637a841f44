use super::ops::{masked_softmax, matmul, matmul_a_bt};
use super::real::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AttentionOutput<T> {
    /// `(queries, keys)` softmax weights; masked keys are exactly zero.
    pub weights: Tensor<T>,
    /// `(queries, value_dim)`.
    pub output: Tensor<T>,
}

/// Scaled dot-product attention, `softmax(QKᵀ/√d)·V`, where keys with
/// `mask == 0` receive zero weight.
pub fn scaled_attention<T: Real>(
    queries: &Tensor<T>,
    keys: &Tensor<T>,
    values: &Tensor<T>,
    mask: &[u8],
) -> Result<AttentionOutput<T>> {
    let (nq, d) = dims2(queries)?;
    let (nk, dk) = dims2(keys)?;
    let (nv, dv) = dims2(values)?;
    if d != dk || nk != nv || mask.len() != nk {
        return Err(Error::Contract(format!(
            "attention shapes disagree: q {:?}, k {:?}, v {:?}, mask {}",
            queries.shape(),
            keys.shape(),
            values.shape(),
            mask.len()
        )));
    }
    let weights = attention_weights(queries.data(), keys.data(), nq, nk, d, mask)?;
    let output = matmul(&weights, values.data(), nq, nk, dv);
    Ok(AttentionOutput {
        weights: Tensor::from_vec(&[nq, nk], weights)?,
        output: Tensor::from_vec(&[nq, dv], output)?,
    })
}

pub(crate) fn attention_weights<T: Real>(
    q: &[T],
    k: &[T],
    nq: usize,
    nk: usize,
    d: usize,
    mask: &[u8],
) -> Result<Vec<T>> {
    let scale = T::one() / T::from_usize(d).unwrap().sqrt();
    let mut scores = matmul_a_bt(q, k, nq, d, nk);
    for row in scores.chunks_mut(nk) {
        for v in row.iter_mut() {
            *v = *v * scale;
        }
        if !masked_softmax(row, |j| mask[j] == 1) {
            return Err(Error::Contract(
                "every key position is masked; softmax is undefined".into(),
            ));
        }
    }
    Ok(scores)
}

fn dims2<T: Real>(t: &Tensor<T>) -> Result<(usize, usize)> {
    match *t.shape() {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Contract(format!(
            "expected a rank-2 tensor, got shape {:?}",
            t.shape()
        ))),
    }
}
