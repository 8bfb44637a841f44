//! Bidirectional transformer encoder: configuration, parameters, forward and
//! backward passes, and the portable checkpoint format.

mod attention;
mod checkpoint;
mod config;
mod model;
mod ops;
mod params;
mod real;
mod store;
mod tensor;

pub use attention::{scaled_attention, AttentionOutput};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_path, save_checkpoint, save_checkpoint_path, FORMAT_VERSION,
    MAGIC,
};
pub use config::EncoderConfig;
pub(crate) use model::two_mut;
pub use model::{Dropout, Encoder, SeqCache};
pub use ops::{
    affine, affine_backward, argmax, cross_entropy_row, gelu, layer_norm, matmul, matmul_a_bt,
    matmul_at_b_acc,
};
pub use params::{
    cast_params, encoder_layout, init_tensor, kind_of, layer_param, truncated_normal, zeros_like,
    ParamKind, Params, EMBEDDING_NORM_SCALE, EMBEDDING_NORM_SHIFT, MLM_OUTPUT_BIAS,
    POSITION_EMBEDDING, SEGMENT_EMBEDDING, TOKEN_EMBEDDING,
};
pub use real::Real;
pub use store::{WeightStore, HEAD_PREFIX};
pub use tensor::Tensor;

use crate::error::Result;
use crate::tokenizer::EncodedInput;

/// Build a fresh store for `config`.
pub fn init_weights(config: &EncoderConfig) -> Result<WeightStore> {
    WeightStore::init(config)
}

/// Last-layer hidden states and the position-0 (`[CLS]`) vector per item.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// `(batch, length, hidden)`; padding rows are zero.
    pub hidden: Tensor<f32>,
    /// `(batch, hidden)`.
    pub pooled: Tensor<f32>,
}

/// Inference-mode forward pass over a batch of equal-length inputs.
pub fn forward(batch: &[EncodedInput], weights: &WeightStore) -> Result<EncoderOutput> {
    let cfg = &weights.config;
    let h = cfg.hidden;
    let len = batch.iter().map(EncodedInput::len).max().unwrap_or(0);
    if let Some(bad) = batch.iter().find(|b| b.len() != len) {
        return Err(crate::Error::input(format!(
            "batch mixes lengths {} and {len}",
            bad.len()
        )));
    }
    let encoder = Encoder::new(cfg, &weights.tensors);
    let mut hidden = vec![0f32; batch.len() * len * h];
    let mut pooled = vec![0f32; batch.len() * h];
    for (b, input) in batch.iter().enumerate() {
        let cache = encoder.forward_seq(input, None)?;
        let base = b * len * h;
        hidden[base..base + cache.n * h].copy_from_slice(&cache.output);
        pooled[b * h..(b + 1) * h].copy_from_slice(&cache.output[..h]);
    }
    Ok(EncoderOutput {
        hidden: Tensor::from_vec(&[batch.len(), len, h], hidden)?,
        pooled: Tensor::from_vec(&[batch.len(), h], pooled)?,
    })
}
