//! Masked-language-model pre-training, from scratch or continued from an
//! existing checkpoint.

mod corpus;
mod loss;
mod masking;
mod trainer;

pub use corpus::Corpus;
pub use loss::{mlm_loss, mlm_objective, MlmOutput, MlmStats};
pub use masking::{apply_masking, MaskAction, MaskedBatch, MaskingPolicy};
pub use trainer::*;
