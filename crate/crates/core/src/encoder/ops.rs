//! Row-major dense kernels shared by the forward and backward passes.

use super::real::Real;

/// `a (m×k) · b (k×n)`.
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// `x (m×k) · w (k×n) + bias (n)`.
pub fn affine<T: Real>(x: &[T], w: &[T], bias: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = matmul(x, w, m, k, n);
    for row in out.chunks_mut(n) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o = *o + b;
        }
    }
    out
}

/// `out (k×n) += aᵀ (k×m) · b (m×n)`.
pub fn matmul_at_b_acc<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `a (m×n) · bᵀ` where `b` is `k×n`; result `m×k`.
pub fn matmul_a_bt<T: Real>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            out[i * k + j] = arow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
        }
    }
    out
}

/// Backward of [`affine`]: accumulates weight and bias gradients and returns
/// the gradient with respect to `x`.
pub fn affine_backward<T: Real>(
    x: &[T],
    w: &[T],
    d_out: &[T],
    m: usize,
    k: usize,
    n: usize,
    d_w: &mut [T],
    d_bias: &mut [T],
) -> Vec<T> {
    matmul_at_b_acc(x, d_out, m, k, n, d_w);
    for row in d_out.chunks(n) {
        for (g, &d) in d_bias.iter_mut().zip(row) {
            *g = *g + d;
        }
    }
    matmul_a_bt(d_out, w, m, n, k)
}

/// Normalized rows and per-row `1/σ`, kept for the backward pass.
pub struct NormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Per-row layer normalization over the last axis of width `n`.
pub fn layer_norm<T: Real>(
    x: &[T],
    scale: &[T],
    shift: &[T],
    n: usize,
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let rows = x.len() / n;
    let nf = T::from_usize(n).unwrap();
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * n..(r + 1) * n];
        let mean = row.iter().copied().sum::<T>() / nf;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for j in 0..n {
            let h = (row[j] - mean) * inv;
            xhat[r * n + j] = h;
            out[r * n + j] = h * scale[j] + shift[j];
        }
    }
    (out, NormCache { xhat, inv_std })
}

pub fn layer_norm_backward<T: Real>(
    d_out: &[T],
    cache: &NormCache<T>,
    scale: &[T],
    n: usize,
    d_scale: &mut [T],
    d_shift: &mut [T],
) -> Vec<T> {
    let rows = d_out.len() / n;
    let nf = T::from_usize(n).unwrap();
    let mut dx = vec![T::zero(); d_out.len()];
    let mut dxhat = vec![T::zero(); n];
    for r in 0..rows {
        let xh = &cache.xhat[r * n..(r + 1) * n];
        let dy = &d_out[r * n..(r + 1) * n];
        for j in 0..n {
            d_scale[j] = d_scale[j] + dy[j] * xh[j];
            d_shift[j] = d_shift[j] + dy[j];
            dxhat[j] = dy[j] * scale[j];
        }
        let mean_d = dxhat.iter().copied().sum::<T>() / nf;
        let mean_dx = dxhat.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / nf;
        let inv = cache.inv_std[r];
        for j in 0..n {
            dx[r * n + j] = inv * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
    }
    dx
}

/// Exact (erf-based) GELU.
pub fn gelu<T: Real>(x: T) -> T {
    T::lit(0.5) * x * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let cdf = T::lit(0.5) * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = (-(x * x) * T::lit(0.5)).exp() * T::lit(0.398_942_280_401_432_7);
    cdf + x * pdf
}

/// In-place softmax of one row, restricted to `keep[j] == true`; excluded
/// entries are set to exactly zero. Returns `false` when nothing is kept.
pub fn masked_softmax<T: Real>(row: &mut [T], keep: impl Fn(usize) -> bool) -> bool {
    let mut max = T::neg_infinity();
    for (j, &v) in row.iter().enumerate() {
        if keep(j) && v > max {
            max = v;
        }
    }
    if max == T::neg_infinity() {
        return false;
    }
    let mut total = T::zero();
    for (j, v) in row.iter_mut().enumerate() {
        if keep(j) {
            *v = (*v - max).exp();
            total = total + *v;
        } else {
            *v = T::zero();
        }
    }
    for v in row.iter_mut() {
        *v = *v / total;
    }
    true
}

/// Log-softmax cross-entropy of one row against `target`; writes
/// `softmax - onehot` into `grad` (scaled by `weight`) and returns the loss.
pub fn cross_entropy_row<T: Real>(logits: &[T], target: usize, weight: T, grad: &mut [T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let total: T = logits.iter().map(|&v| (v - max).exp()).sum();
    let log_z = max + total.ln();
    for (j, (&v, g)) in logits.iter().zip(grad.iter_mut()).enumerate() {
        let p = (v - log_z).exp();
        let onehot = if j == target { T::one() } else { T::zero() };
        *g = *g + weight * (p - onehot);
    }
    log_z - logits[target]
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
