//! Row-major kernels shared by the regressor and the classifier.

use crate::scalar::Real;

/// `out[m×n] = a[m×k] · b[k×n]`
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `acc[k×n] += a[m×k]ᵀ · b[m×n]`
pub fn matmul_at_b_acc<T: Real>(acc: &mut [T], a: &[T], b: &[T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let out = &mut acc[p * n..(p + 1) * n];
            for (o, &bv) in out.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×k] = a[m×n] · b[k×n]ᵀ`
pub fn matmul_a_bt<T: Real>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            out[i * k + p] = arow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
        }
    }
    out
}

pub fn add_row_bias<T: Real>(x: &mut [T], bias: &[T]) {
    let n = bias.len();
    for row in x.chunks_mut(n) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// `acc[n] += Σ_rows x[m×n]`
pub fn col_sum_acc<T: Real>(acc: &mut [T], x: &[T]) {
    let n = acc.len();
    for row in x.chunks(n) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    let u = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    T::lit(0.5) * x * (T::one() + u.tanh())
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    let u = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    let th = u.tanh();
    let du = T::lit(GELU_C) * (T::one() + T::lit(3.0 * GELU_A) * x * x);
    T::lit(0.5) * (T::one() + th) + T::lit(0.5) * x * (T::one() - th * th) * du
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place<T: Real>(x: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row normalisation state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Normalises each row of `x[rows×d]`, then applies `gamma`, `beta`.
pub fn layer_norm<T: Real>(x: &[T], gamma: &[T], beta: &[T]) -> (Vec<T>, LayerNormCache<T>) {
    let d = gamma.len();
    let df = T::from_usize_lossy(d);
    let eps = T::lit(LAYER_NORM_EPS);
    let rows = x.len() / d;
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() / df;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / df;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for j in 0..d {
            let h = (row[j] - mean) * inv;
            xhat[r * d + j] = h;
            y[r * d + j] = gamma[j] * h + beta[j];
        }
    }
    (y, LayerNormCache { xhat, inv_std })
}

/// Returns `dx`; accumulates into `dgamma`, `dbeta`.
pub fn layer_norm_backward<T: Real>(
    dy: &[T],
    gamma: &[T],
    cache: &LayerNormCache<T>,
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Vec<T> {
    let d = gamma.len();
    let df = T::from_usize_lossy(d);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); d];
    for (r, &inv) in cache.inv_std.iter().enumerate() {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let (mut s1, mut s2) = (T::zero(), T::zero());
        for j in 0..d {
            dgamma[j] += dyr[j] * xh[j];
            dbeta[j] += dyr[j];
            dxhat[j] = dyr[j] * gamma[j];
            s1 += dxhat[j];
            s2 += dxhat[j] * xh[j];
        }
        for j in 0..d {
            dx[r * d + j] = inv / df * (df * dxhat[j] - s1 - xh[j] * s2);
        }
    }
    dx
}
