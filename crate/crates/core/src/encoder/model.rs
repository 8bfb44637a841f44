//! Post-norm transformer encoder: forward pass with caches and the matching
//! hand-written backward pass.
//!
//! Each sequence is processed over its unpadded prefix only. Padding can
//! therefore never reach a real position, and padded rows of the output are
//! zero.

use rand::Rng;

use super::attention::attention_weights;
use super::config::EncoderConfig;
use super::ops::{
    affine, gelu, gelu_grad, layer_norm, layer_norm_backward, matmul, matmul_a_bt, matmul_at_b_acc,
    NormCache,
};
use super::params::{
    layer_param, Params, EMBEDDING_NORM_SCALE, EMBEDDING_NORM_SHIFT, POSITION_EMBEDDING,
    SEGMENT_EMBEDDING, TOKEN_EMBEDDING,
};
use super::real::Real;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::tokenizer::EncodedInput;

/// Training-time dropout source. A rate of zero disables masking.
pub struct Dropout<'r> {
    pub rate: f32,
    pub rng: &'r mut StreamRng,
}

impl Dropout<'_> {
    fn mask<T: Real>(&mut self, len: usize) -> Option<Vec<T>> {
        if self.rate <= 0.0 {
            return None;
        }
        let keep = T::lit(1.0 / (1.0 - self.rate as f64));
        Some(
            (0..len)
                .map(|_| {
                    if self.rng.random::<f32>() < self.rate {
                        T::zero()
                    } else {
                        keep
                    }
                })
                .collect(),
        )
    }
}

fn apply_mask<T: Real>(x: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        for (v, &s) in x.iter_mut().zip(m) {
            *v = *v * s;
        }
    }
}

struct LayerCache<T> {
    input: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    probs: Vec<T>,
    probs_drop: Option<Vec<T>>,
    ctx: Vec<T>,
    attn_drop: Option<Vec<T>>,
    norm1: NormCache<T>,
    a: Vec<T>,
    inner: Vec<T>,
    act: Vec<T>,
    ffn_drop: Option<Vec<T>>,
    norm2: NormCache<T>,
}

/// Everything the backward pass needs for one sequence.
pub struct SeqCache<T> {
    pub n: usize,
    ids: Vec<u32>,
    segments: Vec<u8>,
    emb_norm: NormCache<T>,
    emb_drop: Option<Vec<T>>,
    layers: Vec<LayerCache<T>>,
    /// Final hidden states, `n × hidden`.
    pub output: Vec<T>,
}

pub struct Encoder<'p, T> {
    cfg: &'p EncoderConfig,
    params: &'p Params<T>,
}

fn head_cols<T: Real>(x: &[T], n: usize, width: usize, h: usize, d: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n * d);
    for r in 0..n {
        out.extend_from_slice(&x[r * width + h * d..r * width + (h + 1) * d]);
    }
    out
}

fn add_head_cols<T: Real>(dst: &mut [T], src: &[T], n: usize, width: usize, h: usize, d: usize) {
    for r in 0..n {
        for j in 0..d {
            let slot = &mut dst[r * width + h * d + j];
            *slot = *slot + src[r * d + j];
        }
    }
}

impl<'p, T: Real> Encoder<'p, T> {
    pub fn new(cfg: &'p EncoderConfig, params: &'p Params<T>) -> Self {
        Encoder { cfg, params }
    }

    fn p(&self, name: &str) -> &[T] {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} missing"))
            .data()
    }

    fn lp(&self, layer: usize, suffix: &str) -> &[T] {
        self.p(&layer_param(layer, suffix))
    }

    /// Reject inputs the encoder cannot represent.
    pub fn check_input(&self, input: &EncodedInput) -> Result<()> {
        if input.len() > self.cfg.max_positions {
            return Err(Error::input(format!(
                "input length {} exceeds max_positions {}",
                input.len(),
                self.cfg.max_positions
            )));
        }
        if let Some(&bad) = input
            .ids
            .iter()
            .find(|&&id| id as usize >= self.cfg.vocab_size)
        {
            return Err(Error::input(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.cfg.vocab_size
            )));
        }
        if let Some(&bad) = input.segments.iter().find(|&&s| s > 1) {
            return Err(Error::input(format!("segment id {bad} is not 0 or 1")));
        }
        if input.real_len() == 0 {
            return Err(Error::Contract("input has no unmasked position".into()));
        }
        Ok(())
    }

    pub fn forward_seq(
        &self,
        input: &EncodedInput,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<SeqCache<T>> {
        self.check_input(input)?;
        let cfg = self.cfg;
        let (hd, f, heads) = (cfg.hidden, cfg.ff_dim, cfg.heads);
        let d = cfg.head_dim();
        let n = input.real_len();
        let eps = T::lit(cfg.layernorm_epsilon as f64);
        let mask = &input.mask[..n];

        let token = self.p(TOKEN_EMBEDDING);
        let position = self.p(POSITION_EMBEDDING);
        let segment = self.p(SEGMENT_EMBEDDING);
        let mut emb = vec![T::zero(); n * hd];
        for pos in 0..n {
            let id = input.ids[pos] as usize;
            let seg = input.segments[pos] as usize;
            for j in 0..hd {
                emb[pos * hd + j] =
                    token[id * hd + j] + position[pos * hd + j] + segment[seg * hd + j];
            }
        }
        let (mut x, emb_norm) = layer_norm(
            &emb,
            self.p(EMBEDDING_NORM_SCALE),
            self.p(EMBEDDING_NORM_SHIFT),
            hd,
            eps,
        );
        let emb_drop = dropout.as_mut().and_then(|dr| dr.mask(n * hd));
        apply_mask(&mut x, &emb_drop);

        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let q = affine(
                &x,
                self.lp(l, "attention.query"),
                self.lp(l, "attention.query_bias"),
                n,
                hd,
                hd,
            );
            let k = affine(
                &x,
                self.lp(l, "attention.key"),
                self.lp(l, "attention.key_bias"),
                n,
                hd,
                hd,
            );
            let v = affine(
                &x,
                self.lp(l, "attention.value"),
                self.lp(l, "attention.value_bias"),
                n,
                hd,
                hd,
            );

            let mut probs = Vec::with_capacity(heads * n * n);
            let mut ctx = vec![T::zero(); n * hd];
            let probs_drop = dropout.as_mut().and_then(|dr| dr.mask(heads * n * n));
            for h in 0..heads {
                let qh = head_cols(&q, n, hd, h, d);
                let kh = head_cols(&k, n, hd, h, d);
                let vh = head_cols(&v, n, hd, h, d);
                let p = attention_weights(&qh, &kh, n, n, d, mask)?;
                let mut pd = p.clone();
                if let Some(m) = &probs_drop {
                    for (x, &s) in pd.iter_mut().zip(&m[h * n * n..(h + 1) * n * n]) {
                        *x = *x * s;
                    }
                }
                let ch = matmul(&pd, &vh, n, n, d);
                add_head_cols(&mut ctx, &ch, n, hd, h, d);
                probs.extend(p);
            }
            let mut attn_out = affine(
                &ctx,
                self.lp(l, "attention.output"),
                self.lp(l, "attention.output_bias"),
                n,
                hd,
                hd,
            );
            let attn_drop = dropout.as_mut().and_then(|dr| dr.mask(n * hd));
            apply_mask(&mut attn_out, &attn_drop);
            let res1: Vec<T> = x.iter().zip(&attn_out).map(|(&a, &b)| a + b).collect();
            let (a, norm1) = layer_norm(
                &res1,
                self.lp(l, "attention.norm.scale"),
                self.lp(l, "attention.norm.shift"),
                hd,
                eps,
            );

            let inner = affine(
                &a,
                self.lp(l, "ffn.inner"),
                self.lp(l, "ffn.inner_bias"),
                n,
                hd,
                f,
            );
            let act: Vec<T> = inner.iter().map(|&u| gelu(u)).collect();
            let mut ffn_out = affine(
                &act,
                self.lp(l, "ffn.outer"),
                self.lp(l, "ffn.outer_bias"),
                n,
                f,
                hd,
            );
            let ffn_drop = dropout.as_mut().and_then(|dr| dr.mask(n * hd));
            apply_mask(&mut ffn_out, &ffn_drop);
            let res2: Vec<T> = a.iter().zip(&ffn_out).map(|(&a, &b)| a + b).collect();
            let (out, norm2) = layer_norm(
                &res2,
                self.lp(l, "ffn.norm.scale"),
                self.lp(l, "ffn.norm.shift"),
                hd,
                eps,
            );

            layers.push(LayerCache {
                input: std::mem::replace(&mut x, out),
                q,
                k,
                v,
                probs,
                probs_drop,
                ctx,
                attn_drop,
                norm1,
                a,
                inner,
                act,
                ffn_drop,
                norm2,
            });
        }

        Ok(SeqCache {
            n,
            ids: input.ids[..n].to_vec(),
            segments: input.segments[..n].to_vec(),
            emb_norm,
            emb_drop,
            layers,
            output: x,
        })
    }

    /// Accumulate parameter gradients for one sequence given `d_out`, the
    /// loss gradient with respect to the final hidden states (`n × hidden`).
    pub fn backward_seq(&self, cache: &SeqCache<T>, d_out: &[T], grads: &mut Params<T>) {
        let cfg = self.cfg;
        let (hd, f, heads) = (cfg.hidden, cfg.ff_dim, cfg.heads);
        let d = cfg.head_dim();
        let n = cache.n;
        let scale = T::one() / T::from_usize(d).unwrap().sqrt();
        let mut dx = d_out.to_vec();

        for l in (0..cfg.layers).rev() {
            let c = &cache.layers[l];

            let d_res2 = {
                let (ds, dsh) = two_mut(
                    grads,
                    &layer_param(l, "ffn.norm.scale"),
                    &layer_param(l, "ffn.norm.shift"),
                );
                layer_norm_backward(&dx, &c.norm2, self.lp(l, "ffn.norm.scale"), hd, ds, dsh)
            };
            let mut da = d_res2.clone();
            let mut d_ffn = d_res2;
            apply_mask(&mut d_ffn, &c.ffn_drop);
            let d_act = self.linear_back(grads, l, "ffn.outer", &c.act, &d_ffn, n, f, hd);
            let d_inner: Vec<T> = d_act
                .iter()
                .zip(&c.inner)
                .map(|(&g, &u)| g * gelu_grad(u))
                .collect();
            let d_a2 = self.linear_back(grads, l, "ffn.inner", &c.a, &d_inner, n, hd, f);
            for (x, y) in da.iter_mut().zip(&d_a2) {
                *x = *x + *y;
            }

            let d_res1 = {
                let (ds, dsh) = two_mut(
                    grads,
                    &layer_param(l, "attention.norm.scale"),
                    &layer_param(l, "attention.norm.shift"),
                );
                layer_norm_backward(
                    &da,
                    &c.norm1,
                    self.lp(l, "attention.norm.scale"),
                    hd,
                    ds,
                    dsh,
                )
            };
            let mut d_input = d_res1.clone();
            let mut d_attn = d_res1;
            apply_mask(&mut d_attn, &c.attn_drop);
            let d_ctx = self.linear_back(grads, l, "attention.output", &c.ctx, &d_attn, n, hd, hd);

            let mut dq = vec![T::zero(); n * hd];
            let mut dk = vec![T::zero(); n * hd];
            let mut dv = vec![T::zero(); n * hd];
            for h in 0..heads {
                let qh = head_cols(&c.q, n, hd, h, d);
                let kh = head_cols(&c.k, n, hd, h, d);
                let vh = head_cols(&c.v, n, hd, h, d);
                let dch = head_cols(&d_ctx, n, hd, h, d);
                let p = &c.probs[h * n * n..(h + 1) * n * n];
                let drop = c
                    .probs_drop
                    .as_ref()
                    .map(|m| &m[h * n * n..(h + 1) * n * n]);
                let pd: Vec<T> = match drop {
                    Some(m) => p.iter().zip(m).map(|(&a, &b)| a * b).collect(),
                    None => p.to_vec(),
                };
                // ctx_h = pd · v_h
                let mut d_pd = matmul_a_bt(&dch, &vh, n, d, n);
                let mut dvh = vec![T::zero(); n * d];
                matmul_at_b_acc(&pd, &dch, n, n, d, &mut dvh);
                if let Some(m) = drop {
                    for (g, &s) in d_pd.iter_mut().zip(m) {
                        *g = *g * s;
                    }
                }
                // softmax backward, row-wise
                let mut ds = vec![T::zero(); n * n];
                for r in 0..n {
                    let prow = &p[r * n..(r + 1) * n];
                    let grow = &d_pd[r * n..(r + 1) * n];
                    let dot: T = prow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                    for j in 0..n {
                        ds[r * n + j] = prow[j] * (grow[j] - dot) * scale;
                    }
                }
                let dqh = matmul(&ds, &kh, n, n, d);
                let mut dkh = vec![T::zero(); n * d];
                matmul_at_b_acc(&ds, &qh, n, n, d, &mut dkh);
                add_head_cols(&mut dq, &dqh, n, hd, h, d);
                add_head_cols(&mut dk, &dkh, n, hd, h, d);
                add_head_cols(&mut dv, &dvh, n, hd, h, d);
            }
            for (proj, g) in [
                ("attention.query", &dq),
                ("attention.key", &dk),
                ("attention.value", &dv),
            ] {
                let back = self.linear_back(grads, l, proj, &c.input, g, n, hd, hd);
                for (x, y) in d_input.iter_mut().zip(&back) {
                    *x = *x + *y;
                }
            }
            dx = d_input;
        }

        apply_mask(&mut dx, &cache.emb_drop);
        let d_emb = {
            let (ds, dsh) = two_mut(grads, EMBEDDING_NORM_SCALE, EMBEDDING_NORM_SHIFT);
            layer_norm_backward(
                &dx,
                &cache.emb_norm,
                self.p(EMBEDDING_NORM_SCALE),
                hd,
                ds,
                dsh,
            )
        };
        for pos in 0..n {
            let row = &d_emb[pos * hd..(pos + 1) * hd];
            let id = cache.ids[pos] as usize;
            let seg = cache.segments[pos] as usize;
            add_row(grads, TOKEN_EMBEDDING, id, hd, row);
            add_row(grads, POSITION_EMBEDDING, pos, hd, row);
            add_row(grads, SEGMENT_EMBEDDING, seg, hd, row);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn linear_back(
        &self,
        grads: &mut Params<T>,
        layer: usize,
        name: &str,
        x: &[T],
        d_out: &[T],
        m: usize,
        k: usize,
        n: usize,
    ) -> Vec<T> {
        let wname = layer_param(layer, name);
        let bname = format!("{wname}_bias");
        let w = self.p(&wname);
        let (dw, db) = two_mut(grads, &wname, &bname);
        super::ops::affine_backward(x, w, d_out, m, k, n, dw, db)
    }
}

fn add_row<T: Real>(grads: &mut Params<T>, name: &str, row: usize, width: usize, values: &[T]) {
    let g = grads.get_mut(name).expect("gradient slot").data_mut();
    for (slot, &v) in g[row * width..(row + 1) * width].iter_mut().zip(values) {
        *slot = *slot + v;
    }
}

/// Two distinct gradient buffers at once.
pub(crate) fn two_mut<'a, T: Real>(
    grads: &'a mut Params<T>,
    a: &str,
    b: &str,
) -> (&'a mut [T], &'a mut [T]) {
    let mut first = None;
    let mut second = None;
    for (k, t) in grads.iter_mut() {
        if k == a {
            first = Some(t.data_mut());
        } else if k == b {
            second = Some(t.data_mut());
        }
    }
    (
        first.unwrap_or_else(|| panic!("gradient slot {a} missing")),
        second.unwrap_or_else(|| panic!("gradient slot {b} missing")),
    )
}
