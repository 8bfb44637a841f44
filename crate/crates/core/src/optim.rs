//! AdamW with decoupled weight decay and a linear warmup/decay schedule.

use serde::{Deserialize, Serialize};

use crate::encoder::{kind_of, zeros_like, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub weight_decay: f32,
    /// Global gradient-norm clip; `0` disables clipping.
    pub max_grad_norm: f32,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-6,
            weight_decay: 0.01,
            max_grad_norm: 1.0,
        }
    }
}

/// Linear warmup to `peak` over the first `warmup_fraction` of `total`
/// steps, then linear decay to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule {
    pub peak: f32,
    pub total: usize,
    pub warmup: usize,
}

impl LinearSchedule {
    pub fn new(peak: f32, total: usize, warmup_fraction: f32) -> Self {
        let warmup = (total as f64 * warmup_fraction as f64).round() as usize;
        LinearSchedule {
            peak,
            total: total.max(1),
            warmup,
        }
    }

    /// Learning rate for the 1-based optimizer step `step`.
    pub fn rate(&self, step: usize) -> f32 {
        if self.warmup > 0 && step <= self.warmup {
            return self.peak * step as f32 / self.warmup as f32;
        }
        let remaining = self.total.saturating_sub(step) as f32;
        let span = (self.total - self.warmup).max(1) as f32;
        self.peak * (remaining + 1.0) / (span + 1.0)
    }
}

pub struct AdamW {
    config: AdamWConfig,
    first: Params<f32>,
    second: Params<f32>,
    step: usize,
}

impl AdamW {
    pub fn new(config: AdamWConfig, params: &Params<f32>) -> Self {
        AdamW {
            config,
            first: zeros_like(params),
            second: zeros_like(params),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Register tensors added after construction (e.g. a task head).
    pub fn track(&mut self, params: &Params<f32>) {
        for (k, t) in params {
            if !self.first.contains_key(k) {
                self.first
                    .insert(k.clone(), crate::encoder::Tensor::zeros(t.shape()));
                self.second
                    .insert(k.clone(), crate::encoder::Tensor::zeros(t.shape()));
            }
        }
    }

    /// Global L2 norm of the gradients, accumulated in a fixed (name) order.
    pub fn grad_norm(grads: &Params<f32>) -> f32 {
        grads
            .values()
            .flat_map(|t| t.data().iter())
            .map(|&g| (g as f64) * (g as f64))
            .sum::<f64>()
            .sqrt() as f32
    }

    /// One update with learning rate `lr`. Returns the pre-clip gradient norm.
    pub fn update(&mut self, params: &mut Params<f32>, grads: &Params<f32>, lr: f32) -> f32 {
        self.step += 1;
        let c = &self.config;
        let norm = Self::grad_norm(grads);
        let clip = if c.max_grad_norm > 0.0 && norm > c.max_grad_norm {
            c.max_grad_norm / norm
        } else {
            1.0
        };
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self.first.get_mut(name).expect("moment slot").data_mut();
            let v = self.second.get_mut(name).expect("moment slot").data_mut();
            let decay = if kind_of(name).decays() {
                c.weight_decay
            } else {
                0.0
            };
            for (((w, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                let g = g * clip;
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
                *w -= lr * (update + decay * *w);
            }
        }
        norm
    }
}
