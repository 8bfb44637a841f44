use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::MAX_SEQUENCE_LENGTH;

/// Architecture hyper-parameters of the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_positions: usize,
    pub layernorm_epsilon: f32,
    pub init_std: f32,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            vocab_size: 0,
            hidden: 32,
            layers: 2,
            heads: 2,
            ff_dim: 64,
            max_positions: 64,
            layernorm_epsilon: 1e-12,
            init_std: 0.02,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("vocab_size", self.vocab_size),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("heads", self.heads),
            ("ff_dim", self.ff_dim),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::config(format!(
                "hidden {} is not divisible by heads {}",
                self.hidden, self.heads
            )));
        }
        if !(3..=MAX_SEQUENCE_LENGTH).contains(&self.max_positions) {
            return Err(Error::config(format!(
                "max_positions {} outside 3..={MAX_SEQUENCE_LENGTH}",
                self.max_positions
            )));
        }
        if !(self.layernorm_epsilon > 0.0) || !(self.init_std > 0.0) {
            return Err(Error::config(
                "layernorm_epsilon and init_std must be positive",
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// `key=value` lines, as embedded in checkpoints. Floats use Rust's
    /// shortest round-trip formatting so the text reproduces them exactly.
    pub fn to_text(&self) -> String {
        format!(
            "vocab_size={}\nhidden={}\nlayers={}\nheads={}\nff_dim={}\nmax_positions={}\nlayernorm_epsilon={:?}\ninit_std={:?}\nseed={}\n",
            self.vocab_size,
            self.hidden,
            self.layers,
            self.heads,
            self.ff_dim,
            self.max_positions,
            self.layernorm_epsilon,
            self.init_std,
            self.seed
        )
    }

    /// Parse the keys written by [`to_text`](Self::to_text) out of a
    /// key/value map; unrelated keys are ignored.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        fn get<V: std::str::FromStr>(pairs: &BTreeMap<String, String>, key: &str) -> Result<V> {
            let raw = pairs
                .get(key)
                .ok_or_else(|| Error::format(format!("config is missing {key}")))?;
            raw.parse()
                .map_err(|_| Error::format(format!("config value {key}={raw} is malformed")))
        }
        Ok(EncoderConfig {
            vocab_size: get(pairs, "vocab_size")?,
            hidden: get(pairs, "hidden")?,
            layers: get(pairs, "layers")?,
            heads: get(pairs, "heads")?,
            ff_dim: get(pairs, "ff_dim")?,
            max_positions: get(pairs, "max_positions")?,
            layernorm_epsilon: get(pairs, "layernorm_epsilon")?,
            init_std: get(pairs, "init_std")?,
            seed: get(pairs, "seed")?,
        })
    }
}

pub(crate) fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(format!("config line {} has no '='", n + 1)))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}
