use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::AdamWConfig;

/// Fine-tuning grids the reference recipe searches.
pub const BATCH_SIZE_GRID: [usize; 4] = [10, 16, 32, 64];
pub const LEARNING_RATE_GRID: [f32; 3] = [5e-5, 3e-5, 1e-5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub batch_size: usize,
    pub learning_rate: f32,
    pub epochs: usize,
    pub seed: u64,
    pub max_len: usize,
    pub warmup_fraction: f32,
    pub dropout: f32,
    pub optimizer: AdamWConfig,
    /// Std of the freshly initialized head weights.
    pub head_init_std: f32,
    pub max_answer_subtokens: usize,
    pub doc_stride: usize,
    pub n_best: usize,
    /// Accept batch sizes and learning rates outside the grids.
    pub allow_off_grid: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            batch_size: 32,
            learning_rate: 5e-5,
            epochs: 3,
            seed: 0,
            max_len: 128,
            warmup_fraction: 0.1,
            dropout: 0.1,
            optimizer: AdamWConfig::default(),
            head_init_std: 0.02,
            max_answer_subtokens: 30,
            doc_stride: 128,
            n_best: 5,
            allow_off_grid: false,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.allow_off_grid {
            if !BATCH_SIZE_GRID.contains(&self.batch_size) {
                return Err(Error::config(format!(
                    "batch_size {} is not one of {BATCH_SIZE_GRID:?} (set allow_off_grid to override)",
                    self.batch_size
                )));
            }
            if !LEARNING_RATE_GRID.contains(&self.learning_rate) {
                return Err(Error::config(format!(
                    "learning_rate {} is not one of {LEARNING_RATE_GRID:?} (set allow_off_grid to override)",
                    self.learning_rate
                )));
            }
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::config(
                "batch_size and learning_rate must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(
                "warmup_fraction and dropout must lie in [0, 1)",
            ));
        }
        if self.max_answer_subtokens == 0 || self.doc_stride == 0 || self.n_best == 0 {
            return Err(Error::config(
                "max_answer_subtokens, doc_stride and n_best must be positive",
            ));
        }
        if self.max_len < 4 {
            return Err(Error::config("max_len must be at least 4"));
        }
        Ok(())
    }
}
