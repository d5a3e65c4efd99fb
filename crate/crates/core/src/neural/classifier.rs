//! 1-D convolutional direction classifier over short envelope histories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::norm::Standardizer;
use super::ops::{gelu, gelu_grad, softmax_in_place};
use super::tensor::{Grads, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const N_CLASSES: usize = 3;
const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub n_channels: usize,
    /// Envelope history length in control steps.
    pub n_steps: usize,
    pub n_filters: usize,
}

impl ClassifierConfig {
    /// 10 control steps, 16 filters per convolution.
    pub fn standard(n_channels: usize) -> Self {
        Self { n_channels, n_steps: 10, n_filters: 16 }
    }

    pub fn tiny(n_channels: usize) -> Self {
        Self { n_channels, n_steps: 10, n_filters: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.n_filters == 0 || self.n_steps < 2 * (KERNEL - 1) + 1 {
            return Err(Error::Shape(format!("inconsistent classifier hyperparameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel<T> {
    cfg: ClassifierConfig,
    pub(crate) params: ParamSet<T>,
    pub input_norm: Standardizer<T>,
}

pub struct ClassifierCache<T> {
    x: Vec<T>,
    y1: Vec<T>,
    g1: Vec<T>,
    y2: Vec<T>,
    pooled: Vec<T>,
    pub logits: Vec<T>,
}

const C1W: usize = 0;
const C1B: usize = 1;
const C2W: usize = 2;
const C2B: usize = 3;
const FCW: usize = 4;
const FCB: usize = 5;

/// `out[f][t] = b[f] + Σ_c Σ_k w[f][c][k] · x[c][t + k]`
fn conv1d<T: Real>(x: &[T], c_in: usize, len: usize, w: &[T], b: &[T]) -> Vec<T> {
    let f_out = b.len();
    let out_len = len - KERNEL + 1;
    let mut y = vec![T::zero(); f_out * out_len];
    for f in 0..f_out {
        for t in 0..out_len {
            let mut acc = b[f];
            for c in 0..c_in {
                for k in 0..KERNEL {
                    acc += w[(f * c_in + c) * KERNEL + k] * x[c * len + t + k];
                }
            }
            y[f * out_len + t] = acc;
        }
    }
    y
}

/// Accumulates weight/bias gradients and returns `dx`.
fn conv1d_backward<T: Real>(
    x: &[T],
    c_in: usize,
    len: usize,
    w: &[T],
    dy: &[T],
    f_out: usize,
    dw: &mut [T],
    db: &mut [T],
) -> Vec<T> {
    let out_len = len - KERNEL + 1;
    let mut dx = vec![T::zero(); c_in * len];
    for f in 0..f_out {
        for t in 0..out_len {
            let g = dy[f * out_len + t];
            db[f] += g;
            for c in 0..c_in {
                for k in 0..KERNEL {
                    let wi = (f * c_in + c) * KERNEL + k;
                    dw[wi] += g * x[c * len + t + k];
                    dx[c * len + t + k] += g * w[wi];
                }
            }
        }
    }
    dx
}

impl<T: Real> ClassifierModel<T> {
    pub fn new(cfg: ClassifierConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, f) = (cfg.n_channels, cfg.n_filters);
        let mut p = ParamSet::default();
        p.push("conv1.weight", Tensor::glorot(vec![f, c, KERNEL], c * KERNEL, f * KERNEL, &mut rng));
        p.push("conv1.bias", Tensor::zeros(vec![f]));
        p.push("conv2.weight", Tensor::glorot(vec![f, f, KERNEL], f * KERNEL, f * KERNEL, &mut rng));
        p.push("conv2.bias", Tensor::zeros(vec![f]));
        p.push("fc.weight", Tensor::glorot(vec![f, N_CLASSES], f, N_CLASSES, &mut rng));
        p.push("fc.bias", Tensor::zeros(vec![N_CLASSES]));
        Ok(Self { input_norm: Standardizer::identity(c), cfg, params: p })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    /// Standardises a `[channels][steps]` history into a flat input.
    pub fn prepare(&self, seq: &[Vec<T>]) -> Result<Vec<T>> {
        if seq.len() != self.cfg.n_channels || seq.iter().any(|r| r.len() != self.cfg.n_steps) {
            return Err(Error::Shape(format!(
                "expected history [{} × {}], got [{} × {}]",
                self.cfg.n_channels,
                self.cfg.n_steps,
                seq.len(),
                seq.first().map_or(0, Vec::len)
            )));
        }
        Ok(seq
            .iter()
            .enumerate()
            .flat_map(|(c, row)| row.iter().map(move |&v| (c, v)))
            .map(|(c, v)| self.input_norm.apply(c, v))
            .collect())
    }

    pub fn logits(&self, seq: &[Vec<T>]) -> Result<Vec<T>> {
        Ok(self.forward_prepared(self.prepare(seq)?).logits)
    }

    /// Class probabilities in the order flex, extend, rest.
    pub fn probabilities(&self, seq: &[Vec<T>]) -> Result<Vec<T>> {
        let mut l = self.logits(seq)?;
        softmax_in_place(&mut l);
        Ok(l)
    }

    pub fn predict(&self, seq: &[Vec<T>]) -> Result<usize> {
        Ok(argmax(&self.logits(seq)?))
    }

    pub fn forward_prepared(&self, x: Vec<T>) -> ClassifierCache<T> {
        let (c, len, f) = (self.cfg.n_channels, self.cfg.n_steps, self.cfg.n_filters);
        let p = &self.params;
        let y1 = conv1d(&x, c, len, p.v(C1W), p.v(C1B));
        let g1: Vec<T> = y1.iter().map(|&v| gelu(v)).collect();
        let len1 = len - KERNEL + 1;
        let y2 = conv1d(&g1, f, len1, p.v(C2W), p.v(C2B));
        let len2 = len1 - KERNEL + 1;
        let inv = T::one() / T::from_usize_lossy(len2);
        let pooled: Vec<T> = y2.chunks(len2).map(|r| r.iter().map(|&v| gelu(v)).sum::<T>() * inv).collect();
        let fw = p.v(FCW);
        let logits = (0..N_CLASSES)
            .map(|k| p.v(FCB)[k] + (0..f).map(|j| pooled[j] * fw[j * N_CLASSES + k]).sum::<T>())
            .collect();
        ClassifierCache { x, y1, g1, y2, pooled, logits }
    }

    pub fn backward(&self, cache: &ClassifierCache<T>, d_logits: &[T]) -> Grads<T> {
        let (c, len, f) = (self.cfg.n_channels, self.cfg.n_steps, self.cfg.n_filters);
        let p = &self.params;
        let mut g = p.zero_grads();
        let fw = p.v(FCW);
        let mut d_pooled = vec![T::zero(); f];
        for j in 0..f {
            for k in 0..N_CLASSES {
                g.g(FCW)[j * N_CLASSES + k] += cache.pooled[j] * d_logits[k];
                d_pooled[j] += fw[j * N_CLASSES + k] * d_logits[k];
            }
        }
        for k in 0..N_CLASSES {
            g.g(FCB)[k] += d_logits[k];
        }
        let len1 = len - KERNEL + 1;
        let len2 = len1 - KERNEL + 1;
        let inv = T::one() / T::from_usize_lossy(len2);
        let dy2: Vec<T> = cache
            .y2
            .iter()
            .enumerate()
            .map(|(i, &v)| d_pooled[i / len2] * inv * gelu_grad(v))
            .collect();
        let (mut dw2, mut db2) = (vec![T::zero(); f * f * KERNEL], vec![T::zero(); f]);
        let dg1 = conv1d_backward(&cache.g1, f, len1, p.v(C2W), &dy2, f, &mut dw2, &mut db2);
        g.0[C2W] = dw2;
        g.0[C2B] = db2;
        let dy1: Vec<T> = dg1.iter().zip(&cache.y1).map(|(&d, &y)| d * gelu_grad(y)).collect();
        let (mut dw1, mut db1) = (vec![T::zero(); f * c * KERNEL], vec![T::zero(); f]);
        conv1d_backward(&cache.x, c, len, p.v(C1W), &dy1, f, &mut dw1, &mut db1);
        g.0[C1W] = dw1;
        g.0[C1B] = db1;
        g
    }

    /// Softmax cross-entropy for one prepared example.
    pub fn cross_entropy(&self, x: &[T], label: usize) -> T {
        let cache = self.forward_prepared(x.to_vec());
        cross_entropy(&cache.logits, label)
    }

    pub fn cross_entropy_grads(&self, x: &[T], label: usize) -> (T, Grads<T>) {
        let cache = self.forward_prepared(x.to_vec());
        let loss = cross_entropy(&cache.logits, label);
        let mut d = cache.logits.clone();
        softmax_in_place(&mut d);
        d[label] -= T::one();
        (loss, self.backward(&cache, &d))
    }

    pub(crate) fn from_parts(cfg: ClassifierConfig, params: ParamSet<T>, input_norm: Standardizer<T>) -> Result<Self> {
        let mut m = Self::new(cfg, 0)?;
        if m.params.names() != params.names() {
            return Err(Error::CorruptModel("tensor list does not match hyperparameters".into()));
        }
        for (i, (_, t)) in params.iter().enumerate() {
            if t.shape() != m.params.get(i).shape() {
                return Err(Error::CorruptModel(format!("tensor {} has wrong shape", params.name(i))));
            }
        }
        if input_norm.len() != m.cfg.n_channels {
            return Err(Error::CorruptModel("standardisation statistics have wrong length".into()));
        }
        m.params = params;
        m.input_norm = input_norm;
        Ok(m)
    }
}

pub(crate) fn cross_entropy<T: Real>(logits: &[T], label: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln() + max;
    lse - logits[label]
}

pub fn argmax<T: Real>(x: &[T]) -> usize {
    x.iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn probabilities_sum_to_one() {
        let m = ClassifierModel::<f64>::new(ClassifierConfig::standard(6), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let seq: Vec<Vec<f64>> = (0..6).map(|_| (0..10).map(|_| rng.random_range(-30.0..30.0)).collect()).collect();
            let p = m.probabilities(&seq).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_wrong_shape() {
        let m = ClassifierModel::<f64>::new(ClassifierConfig::standard(6), 2).unwrap();
        assert!(matches!(m.logits(&vec![vec![0.0; 9]; 6]), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_entropy_is_stable() {
        let ce: f64 = cross_entropy(&[1000.0, 0.0, -1000.0], 0);
        assert!(ce.abs() < 1e-12);
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
    }
}
