//! Continued masked-language-model pre-training of a small bidirectional
//! transformer, and fine-tuning it for entity recognition, relation
//! classification and extractive question answering.

pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod heads;
pub mod optim;
pub mod pretrain;
pub mod rng;
pub mod tags;
pub mod tokenizer;

pub use error::{Error, Result};
