//! Brute-force reference implementations shared by the property and
//! acceptance tests. Each one restates a definition directly, with no
//! attempt at efficiency.
#![allow(dead_code)]

use minibert::encoder::{EncoderConfig, Params};
use minibert::eval::EntitySpan;
use minibert::tokenizer::{encode_sequence, EncodedInput, Vocabulary};
use rand::Rng;

/// Every inclusive `(start, end, type)` whose tags spell a well-formed BIOES entity.
pub fn spans_oracle(tags: &[String]) -> Vec<EntitySpan> {
    let mut out = Vec::new();
    for i in 0..tags.len() {
        for j in i..tags.len() {
            let Some(kind) = tags[i].get(2..) else {
                continue;
            };
            let ok = if i == j {
                tags[i] == format!("S-{kind}")
            } else {
                tags[i] == format!("B-{kind}")
                    && tags[j] == format!("E-{kind}")
                    && (i + 1..j).all(|k| tags[k] == format!("I-{kind}"))
            };
            if ok {
                out.push(EntitySpan::new(i, j, kind));
            }
        }
    }
    out
}

/// `(precision, recall, f1)` by counting matches pair by pair.
pub fn prf_oracle(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> (f64, f64, f64) {
    let (mut tp, mut n_gold, mut n_pred) = (0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(pred) {
        n_gold += g.len();
        n_pred += p.len();
        for a in p {
            if g.iter().any(|b| b == a) {
                tp += 1;
            }
        }
    }
    if n_gold == 0 && n_pred == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if n_pred == 0 {
        0.0
    } else {
        tp as f64 / n_pred as f64
    };
    let r = if n_gold == 0 {
        0.0
    } else {
        tp as f64 / n_gold as f64
    };
    let f = if tp == 0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// A random valid BIOES sequence over `types`.
pub fn random_bioes(rng: &mut impl Rng, len: usize, types: &[&str]) -> Vec<String> {
    let mut tags = Vec::with_capacity(len);
    while tags.len() < len {
        let room = len - tags.len();
        if rng.random_bool(0.5) {
            tags.push("O".to_string());
            continue;
        }
        let kind = types[rng.random_range(0..types.len())];
        let n = rng.random_range(1..=room.min(4));
        if n == 1 {
            tags.push(format!("S-{kind}"));
        } else {
            tags.push(format!("B-{kind}"));
            for _ in 0..n - 2 {
                tags.push(format!("I-{kind}"));
            }
            tags.push(format!("E-{kind}"));
        }
    }
    tags
}

pub struct SpanInstance {
    pub encoded: EncodedInput,
    pub passage: String,
    pub start: Vec<f32>,
    pub end: Vec<f32>,
    pub max_answer: usize,
    pub n_best: usize,
}

pub fn letters_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend(('a'..='h').map(|c| c.to_string()));
    tokens.extend(["ab", "##b", "##cd", "cd", "##a"].map(String::from));
    Vocabulary::from_tokens(tokens).unwrap()
}

/// Random question/passage pair with random logits; scores come from a
/// small integer grid so ties are common.
pub fn random_span_instance(rng: &mut impl Rng, vocab: &Vocabulary) -> SpanInstance {
    let word = |rng: &mut dyn rand::RngCore| {
        let pool = ["a", "b", "ab", "abb", "cd", "acd", "zz", "h", "e"];
        pool[rng.random_range(0..pool.len())].to_string()
    };
    let q: Vec<String> = (0..rng.random_range(1..4)).map(|_| word(rng)).collect();
    let p: Vec<String> = (0..rng.random_range(1..10)).map(|_| word(rng)).collect();
    let passage = p.join(" ");
    let max_len = rng.random_range(8..24);
    let encoded = encode_sequence(&q.join(" "), Some(&passage), vocab, max_len).unwrap();
    let n = encoded.len();
    let mut logits = || -> Vec<f32> {
        (0..n)
            .map(|_| rng.random_range(-3..=3) as f32 * 0.5)
            .collect()
    };
    let start = logits();
    let end = logits();
    SpanInstance {
        encoded,
        passage,
        start,
        end,
        max_answer: rng.random_range(1..6),
        n_best: rng.random_range(1..8),
    }
}

/// All `(score, i, j)` pairs, sorted by the ranking rule, cut to `n_best`.
pub fn span_oracle(inst: &SpanInstance) -> Vec<(f32, usize, usize)> {
    let e = &inst.encoded;
    let ok = |p: usize| e.segments[p] == 1 && e.mask[p] == 1 && e.word_index[p].is_some();
    let mut all = Vec::new();
    for i in 0..e.len() {
        for j in 0..e.len() {
            if ok(i) && ok(j) && i <= j && j - i < inst.max_answer {
                all.push((inst.start[i] + inst.end[j], i, j));
            }
        }
    }
    // selection sort by (score desc, i asc, j asc)
    let mut out = Vec::new();
    while !all.is_empty() && out.len() < inst.n_best {
        let mut best = 0;
        for k in 1..all.len() {
            let (s, i, j) = all[k];
            let (bs, bi, bj) = all[best];
            if s > bs || (s == bs && (i, j) < (bi, bj)) {
                best = k;
            }
        }
        out.push(all.remove(best));
    }
    out
}

/// The hidden-8, two-layer, two-head config used for gradient checks.
pub fn tiny_config(v: &Vocabulary) -> EncoderConfig {
    EncoderConfig {
        vocab_size: v.len(),
        hidden: 8,
        layers: 2,
        heads: 2,
        ff_dim: 16,
        max_positions: 16,
        init_std: 0.5,
        seed: 4,
        ..Default::default()
    }
}

/// Per tensor `(name, scale, relative error)` of `grads` against central
/// differences of `loss` with step 1e-3. The error is
/// `||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-7)`; the floor
/// covers gradients that are identically zero, such as attention key biases.
pub fn relative_errors(
    params: &mut Params<f64>,
    grads: &Params<f64>,
    loss: impl Fn(&Params<f64>) -> f64,
) -> Vec<(String, f64, f64)> {
    let step = 1e-3;
    let names: Vec<String> = params.keys().cloned().collect();
    let mut out = Vec::new();
    for name in names {
        let n = params[&name].len();
        let mut numeric = vec![0.0; n];
        for i in 0..n {
            let orig = params[&name].data()[i];
            params.get_mut(&name).unwrap().data_mut()[i] = orig + step;
            let up = loss(params);
            params.get_mut(&name).unwrap().data_mut()[i] = orig - step;
            let down = loss(params);
            params.get_mut(&name).unwrap().data_mut()[i] = orig;
            numeric[i] = (up - down) / (2.0 * step);
        }
        let analytic = grads[&name].data();
        let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
        let diff = norm(&mut analytic.iter().zip(&numeric).map(|(a, b)| a - b));
        let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
        out.push((name, scale, diff / scale.max(1e-7)));
    }
    out
}
