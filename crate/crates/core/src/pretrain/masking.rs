use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::tokenizer::{EncodedInput, Vocabulary};

/// How positions are chosen and corrupted for masked-LM training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskingPolicy {
    pub mask_fraction: f64,
    pub replace_with_mask: f64,
    pub replace_with_random: f64,
    pub keep_original: f64,
    pub seed: u64,
}

impl Default for MaskingPolicy {
    fn default() -> Self {
        MaskingPolicy {
            mask_fraction: 0.15,
            replace_with_mask: 0.80,
            replace_with_random: 0.10,
            keep_original: 0.10,
            seed: 0,
        }
    }
}

impl MaskingPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return Err(Error::config("mask_fraction must lie in (0, 1)"));
        }
        let parts = [
            self.replace_with_mask,
            self.replace_with_random,
            self.keep_original,
        ];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::config(
                "replacement probabilities must lie in [0, 1]",
            ));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("replacement probabilities must sum to 1"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        MaskingPolicy {
            seed,
            ..self.clone()
        }
    }
}

/// What happened to a selected position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskAction {
    Mask,
    Random,
    Keep,
}

/// A corrupted batch plus prediction targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedBatch {
    pub inputs: Vec<EncodedInput>,
    /// Original id at selected positions, `None` (ignored) elsewhere.
    pub labels: Vec<Vec<Option<u32>>>,
    /// `(item, position)` pairs selected for prediction, in order.
    pub mask_positions: Vec<(usize, usize)>,
    /// The corruption applied at each entry of `mask_positions`.
    pub actions: Vec<MaskAction>,
}

/// Select and corrupt positions. Only real, non-special tokens are eligible.
/// The outcome depends only on `policy.seed` and the batch contents.
pub fn apply_masking(
    batch: &[EncodedInput],
    policy: &MaskingPolicy,
    vocab: &Vocabulary,
) -> MaskedBatch {
    let mut rng = substream(policy.seed, "pretrain.mask");
    let special = vocab.special();
    let v = vocab.len() as u32;

    let mut inputs = batch.to_vec();
    let mut labels = Vec::with_capacity(batch.len());
    let mut mask_positions = Vec::new();
    let mut actions = Vec::new();
    for (item, input) in inputs.iter_mut().enumerate() {
        let mut item_labels = vec![None; input.len()];
        for pos in 0..input.len() {
            let id = input.ids[pos];
            if input.mask[pos] == 0 || special.contains(id) {
                continue;
            }
            if rng.random::<f64>() >= policy.mask_fraction {
                continue;
            }
            item_labels[pos] = Some(id);
            mask_positions.push((item, pos));
            let roll = rng.random::<f64>();
            let action = if roll < policy.replace_with_mask {
                MaskAction::Mask
            } else if roll < policy.replace_with_mask + policy.replace_with_random {
                MaskAction::Random
            } else {
                MaskAction::Keep
            };
            match action {
                MaskAction::Mask => input.ids[pos] = special.mask,
                MaskAction::Random => loop {
                    let candidate = rng.random_range(0..v);
                    if !special.contains(candidate) {
                        input.ids[pos] = candidate;
                        break;
                    }
                },
                MaskAction::Keep => {}
            }
            actions.push(action);
        }
        labels.push(item_labels);
    }
    MaskedBatch {
        inputs,
        labels,
        mask_positions,
        actions,
    }
}
