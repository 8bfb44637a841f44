use std::collections::BTreeMap;

use super::config::EncoderConfig;
use super::params::{encoder_layout, init_params, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Prefix for task-head tensors appended by fine-tuning.
pub const HEAD_PREFIX: &str = "head.";

/// The transferable unit: encoder tensors (plus optional task heads), the
/// config they were built for, and the fingerprint of the vocabulary used to
/// train them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    pub config: EncoderConfig,
    pub vocab_fingerprint: Option<String>,
    /// Free-form string annotations (tag sets, label sets, training step).
    pub metadata: BTreeMap<String, String>,
    pub tensors: Params<f32>,
}

impl WeightStore {
    /// Fresh weights for `config`, fully determined by `config.seed`.
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        Ok(WeightStore {
            config: config.clone(),
            vocab_fingerprint: None,
            metadata: BTreeMap::new(),
            tensors: init_params(config),
        })
    }

    pub fn with_vocab_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.vocab_fingerprint = Some(fingerprint.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.get(name)
    }

    /// Encoder-only view (heads stripped).
    pub fn encoder_tensors(&self) -> Params<f32> {
        self.tensors
            .iter()
            .filter(|(k, _)| !k.starts_with(HEAD_PREFIX))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Names whose presence or shape differs from what the config dictates.
    pub fn layout_mismatches(&self) -> Vec<String> {
        let expected = encoder_layout(&self.config);
        let mut bad = Vec::new();
        for (name, shape) in &expected {
            match self.tensors.get(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => bad.push(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )),
                None => bad.push(format!("{name} is missing")),
            }
        }
        for name in self.tensors.keys() {
            if !name.starts_with(HEAD_PREFIX) && !expected.iter().any(|(n, _)| n == name) {
                bad.push(format!("{name} is not an encoder tensor"));
            }
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let bad = self.layout_mismatches();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Corruption(bad.join("; ")))
        }
    }

    /// Exact equality of config, metadata and every tensor bit.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.vocab_fingerprint == other.vocab_fingerprint
            && self.metadata == other.metadata
            && self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((ka, a), (kb, b))| ka == kb && a.bit_eq(b))
    }

    /// Tensors of `self` whose shape differs from `other`'s, for transfer checks.
    pub fn shape_mismatches(&self, other: &EncoderConfig) -> Vec<String> {
        let mut bad = Vec::new();
        for (name, shape) in encoder_layout(other) {
            match self.tensors.get(&name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => bad.push(format!("{name}: {:?} vs {shape:?}", t.shape())),
                None => bad.push(format!("{name}: missing")),
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EncoderConfig {
        EncoderConfig {
            vocab_size: 20,
            hidden: 8,
            layers: 1,
            heads: 2,
            ff_dim: 16,
            max_positions: 16,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = WeightStore::init(&tiny()).unwrap();
        let b = WeightStore::init(&tiny()).unwrap();
        assert!(a.bit_eq(&b));
        let mut other = tiny();
        other.seed = 12;
        assert!(!a.bit_eq(&WeightStore::init(&other).unwrap()));
    }

    #[test]
    fn init_shapes() {
        let s = WeightStore::init(&tiny()).unwrap();
        assert_eq!(s.get("layer.0.attention.query").unwrap().shape(), &[8, 8]);
        assert_eq!(s.get("embeddings.token").unwrap().shape(), &[20, 8]);
        assert!(s
            .get("layer.0.attention.query_bias")
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(s
            .get("layer.0.ffn.norm.scale")
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 1.0));
        assert!(s.validate().is_ok());
    }

    #[test]
    fn init_std_statistic() {
        let cfg = EncoderConfig {
            vocab_size: 10_000,
            hidden: 1,
            heads: 1,
            ..tiny()
        };
        let s = WeightStore::init(&cfg).unwrap();
        let data = s.get("embeddings.token").unwrap().data();
        assert_eq!(data.len(), 10_000);
        let mean = data.iter().map(|&v| v as f64).sum::<f64>() / 1e4;
        let var = data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / 1e4;
        assert!((var.sqrt() - 0.02).abs() <= 0.002, "std {}", var.sqrt());
    }

    #[test]
    fn layout_mismatch_reported() {
        let mut s = WeightStore::init(&tiny()).unwrap();
        s.tensors.remove("layer.0.ffn.inner");
        assert!(
            matches!(s.validate(), Err(Error::Corruption(m)) if m.contains("layer.0.ffn.inner"))
        );
    }
}
