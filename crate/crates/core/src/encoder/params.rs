//! Parameter naming, shapes and initialization.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::EncoderConfig;
use super::real::Real;
use super::tensor::Tensor;
use crate::rng::substream;

/// Named tensors; the key set is fixed by [`encoder_layout`] plus any heads.
pub type Params<T = f32> = BTreeMap<String, Tensor<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Matrix,
    Bias,
    NormScale,
    NormShift,
}

impl ParamKind {
    /// Matrices are weight-decayed; biases and norm parameters are not.
    pub fn decays(self) -> bool {
        self == ParamKind::Matrix
    }
}

pub fn kind_of(name: &str) -> ParamKind {
    if name.ends_with(".scale") {
        ParamKind::NormScale
    } else if name.ends_with(".shift") {
        ParamKind::NormShift
    } else if name.ends_with("bias") {
        ParamKind::Bias
    } else {
        ParamKind::Matrix
    }
}

pub fn layer_param(layer: usize, suffix: &str) -> String {
    format!("layer.{layer}.{suffix}")
}

pub const TOKEN_EMBEDDING: &str = "embeddings.token";
pub const POSITION_EMBEDDING: &str = "embeddings.position";
pub const SEGMENT_EMBEDDING: &str = "embeddings.segment";
pub const EMBEDDING_NORM_SCALE: &str = "embeddings.norm.scale";
pub const EMBEDDING_NORM_SHIFT: &str = "embeddings.norm.shift";
pub const MLM_OUTPUT_BIAS: &str = "mlm.output_bias";

/// Every encoder tensor with its shape, in canonical (sorted) order.
///
/// Linear maps are stored `(in, out)` so that `y = x·W + b`. The masked-LM
/// output reuses `embeddings.token` and only adds `mlm.output_bias`.
pub fn encoder_layout(cfg: &EncoderConfig) -> Vec<(String, Vec<usize>)> {
    let (v, h, f) = (cfg.vocab_size, cfg.hidden, cfg.ff_dim);
    let mut out = vec![
        (TOKEN_EMBEDDING.to_string(), vec![v, h]),
        (POSITION_EMBEDDING.to_string(), vec![cfg.max_positions, h]),
        (SEGMENT_EMBEDDING.to_string(), vec![2, h]),
        (EMBEDDING_NORM_SCALE.to_string(), vec![h]),
        (EMBEDDING_NORM_SHIFT.to_string(), vec![h]),
        (MLM_OUTPUT_BIAS.to_string(), vec![v]),
    ];
    for l in 0..cfg.layers {
        for proj in ["query", "key", "value", "output"] {
            out.push((layer_param(l, &format!("attention.{proj}")), vec![h, h]));
            out.push((layer_param(l, &format!("attention.{proj}_bias")), vec![h]));
        }
        out.push((layer_param(l, "attention.norm.scale"), vec![h]));
        out.push((layer_param(l, "attention.norm.shift"), vec![h]));
        out.push((layer_param(l, "ffn.inner"), vec![h, f]));
        out.push((layer_param(l, "ffn.inner_bias"), vec![f]));
        out.push((layer_param(l, "ffn.outer"), vec![f, h]));
        out.push((layer_param(l, "ffn.outer_bias"), vec![h]));
        out.push((layer_param(l, "ffn.norm.scale"), vec![h]));
        out.push((layer_param(l, "ffn.norm.shift"), vec![h]));
    }
    out.sort();
    out
}

/// Ratio between the standard deviation of a unit normal truncated to
/// `[-2, 2]` and that of the untruncated normal.
const TRUNCATED_STD_RATIO: f64 = 0.879_625_657_2;

/// Draw `len` values from a normal truncated at two (underlying) standard
/// deviations, rescaled so the resulting values have standard deviation `std`.
pub fn truncated_normal<R: Rng>(rng: &mut R, len: usize, std: f64) -> Vec<f32> {
    let sigma = std / TRUNCATED_STD_RATIO;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 2.0 * sigma {
            out.push(x as f32);
        }
    }
    out
}

/// Fill one tensor according to its kind. Each tensor draws from its own
/// named stream so adding a tensor never perturbs the others.
pub fn init_tensor(name: &str, shape: &[usize], seed: u64, std: f64) -> Tensor<f32> {
    let len: usize = shape.iter().product();
    let data = match kind_of(name) {
        ParamKind::Matrix => {
            let mut rng = substream(seed, &format!("init.{name}"));
            truncated_normal(&mut rng, len, std)
        }
        ParamKind::Bias | ParamKind::NormShift => vec![0.0; len],
        ParamKind::NormScale => vec![1.0; len],
    };
    Tensor::from_vec(shape, data).expect("shape product matches length")
}

pub fn init_params(cfg: &EncoderConfig) -> Params<f32> {
    encoder_layout(cfg)
        .into_iter()
        .map(|(name, shape)| {
            let t = init_tensor(&name, &shape, cfg.seed, cfg.init_std as f64);
            (name, t)
        })
        .collect()
}

pub fn zeros_like<T: Real, U: Copy + Default>(params: &Params<U>) -> Params<T> {
    params
        .iter()
        .map(|(k, t)| (k.clone(), Tensor::zeros(t.shape())))
        .collect()
}

pub fn cast_params<T: Real>(params: &Params<f32>) -> Params<T> {
    params
        .iter()
        .map(|(k, t)| {
            let data = t.data().iter().map(|&v| T::from_f32(v).unwrap()).collect();
            (k.clone(), Tensor::from_vec(t.shape(), data).unwrap())
        })
        .collect()
}
