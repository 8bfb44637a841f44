use crate::encoder::{
    argmax, cross_entropy_row, matmul_a_bt, Dropout, Encoder, EncoderConfig, Params, Real,
    WeightStore, MLM_OUTPUT_BIAS, TOKEN_EMBEDDING,
};
use crate::error::Result;

use super::masking::MaskedBatch;

/// Masked-LM loss over a batch.
#[derive(Debug, Clone)]
pub struct MlmOutput {
    /// Mean cross-entropy over selected positions; `0` when none were selected.
    pub loss: f32,
    /// Fraction of selected positions whose argmax equals the original id.
    pub accuracy: f32,
    pub predicted: usize,
    pub correct: usize,
    /// Vocabulary logits for each entry of `mask_positions`.
    pub logits: Vec<Vec<f32>>,
}

/// Evaluate the masked-LM objective without dropout or gradients.
pub fn mlm_loss(masked: &MaskedBatch, weights: &WeightStore) -> Result<MlmOutput> {
    let stats = mlm_objective::<f32>(&weights.config, &weights.tensors, masked, None, None, true)?;
    Ok(MlmOutput {
        loss: stats.loss,
        accuracy: stats.accuracy(),
        predicted: stats.predicted,
        correct: stats.correct,
        logits: stats.logits,
    })
}

pub struct MlmStats<T> {
    pub loss: T,
    pub predicted: usize,
    pub correct: usize,
    pub logits: Vec<Vec<T>>,
}

impl<T: Real> MlmStats<T> {
    pub fn accuracy(&self) -> f32 {
        if self.predicted == 0 {
            0.0
        } else {
            self.correct as f32 / self.predicted as f32
        }
    }
}

/// Forward (and optionally backward) pass of the masked-LM objective.
///
/// The output projection is tied to the token embedding, so `grads`
/// receives contributions to `embeddings.token` from both ends.
pub fn mlm_objective<T: Real>(
    cfg: &EncoderConfig,
    params: &Params<T>,
    masked: &MaskedBatch,
    mut dropout: Option<&mut Dropout<'_>>,
    mut grads: Option<&mut Params<T>>,
    keep_logits: bool,
) -> Result<MlmStats<T>> {
    let encoder = Encoder::new(cfg, params);
    let (h, v) = (cfg.hidden, cfg.vocab_size);
    let mut caches = Vec::with_capacity(masked.inputs.len());
    for input in &masked.inputs {
        caches.push(encoder.forward_seq(input, dropout.as_deref_mut())?);
    }
    let m = masked.mask_positions.len();
    let mut stats = MlmStats {
        loss: T::zero(),
        predicted: m,
        correct: 0,
        logits: Vec::new(),
    };
    if m == 0 {
        return Ok(stats);
    }

    let embedding = params[TOKEN_EMBEDDING].data();
    let bias = params[MLM_OUTPUT_BIAS].data();
    let weight = T::one() / T::from_usize(m).unwrap();
    let mut d_hidden: Vec<Vec<T>> = caches.iter().map(|c| vec![T::zero(); c.n * h]).collect();
    let mut d_logits = vec![T::zero(); v];
    let mut total = T::zero();
    for &(item, pos) in &masked.mask_positions {
        let target = masked.labels[item][pos].expect("label at mask position") as usize;
        let row = &caches[item].output[pos * h..(pos + 1) * h];
        let mut logits = matmul_a_bt(row, embedding, 1, h, v);
        for (l, &b) in logits.iter_mut().zip(bias) {
            *l = *l + b;
        }
        if argmax(&logits) == target {
            stats.correct += 1;
        }
        d_logits.iter_mut().for_each(|g| *g = T::zero());
        total = total + cross_entropy_row(&logits, target, weight, &mut d_logits);

        if let Some(grads) = grads.as_deref_mut() {
            // d_hidden = d_logits · E ; dE += d_logitsᵀ · hidden ; d_bias += d_logits
            let dh = &mut d_hidden[item][pos * h..(pos + 1) * h];
            {
                let de = grads.get_mut(TOKEN_EMBEDDING).unwrap().data_mut();
                for (tok, &g) in d_logits.iter().enumerate() {
                    if g == T::zero() {
                        continue;
                    }
                    let erow = &embedding[tok * h..(tok + 1) * h];
                    let drow = &mut de[tok * h..(tok + 1) * h];
                    for j in 0..h {
                        dh[j] = dh[j] + g * erow[j];
                        drow[j] = drow[j] + g * row[j];
                    }
                }
            }
            let db = grads.get_mut(MLM_OUTPUT_BIAS).unwrap().data_mut();
            for (b, &g) in db.iter_mut().zip(&d_logits) {
                *b = *b + g;
            }
        }
        if keep_logits {
            stats.logits.push(logits);
        }
    }
    stats.loss = total * weight;

    if let Some(grads) = grads {
        for (cache, dh) in caches.iter().zip(&d_hidden) {
            encoder.backward_seq(cache, dh, grads);
        }
    }
    Ok(stats)
}
