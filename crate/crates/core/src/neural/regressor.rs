//! Encoder-only Transformer mapping an EEG window to EMG envelope values.
//!
//! The window `[n_eeg_ch × W]` is cut into `W / P` patches; each patch
//! (all channels, `P` samples) is one token. Tokens are linearly embedded,
//! offset by fixed sinusoidal position codes, passed through post-norm
//! encoder layers, mean-pooled and projected to one value per EMG channel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::norm::Standardizer;
use super::ops::{
    add_row_bias, col_sum_acc, gelu, gelu_grad, layer_norm, layer_norm_backward, matmul, matmul_a_bt,
    matmul_at_b_acc, softmax_in_place, LayerNormCache,
};
use super::tensor::{Grads, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub n_eeg_ch: usize,
    pub n_emg_ch: usize,
    /// Window length in samples.
    pub window: usize,
    /// Samples per token.
    pub patch: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
}

impl RegressorConfig {
    /// 200-sample windows, 10-sample patches, D=64, 4 heads, 2 layers.
    pub fn standard(n_eeg_ch: usize, n_emg_ch: usize) -> Self {
        Self { n_eeg_ch, n_emg_ch, window: 200, patch: 10, d_model: 64, n_heads: 4, n_layers: 2 }
    }

    /// Small instance used for finite-difference gradient checks.
    pub fn tiny(n_eeg_ch: usize, n_emg_ch: usize) -> Self {
        Self { n_eeg_ch, n_emg_ch, window: 20, patch: 5, d_model: 8, n_heads: 2, n_layers: 1 }
    }

    pub fn n_tokens(&self) -> usize {
        self.window / self.patch
    }

    pub fn token_dim(&self) -> usize {
        self.n_eeg_ch * self.patch
    }

    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n_eeg_ch > 0
            && self.n_emg_ch > 0
            && self.patch > 0
            && self.window >= self.patch
            && self.window % self.patch == 0
            && self.n_heads > 0
            && self.d_model % self.n_heads == 0
            && self.d_model % 2 == 0
            && self.n_layers > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("inconsistent regressor hyperparameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerIdx {
    wq: usize,
    bq: usize,
    wk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln1_g: usize,
    ln1_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    ln2_g: usize,
    ln2_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel<T> {
    cfg: RegressorConfig,
    pub(crate) params: ParamSet<T>,
    pub input_norm: Standardizer<T>,
    pub target_norm: Standardizer<T>,
    /// Trial ids held out for testing when this model was trained.
    pub test_trials: Vec<usize>,
    pe: Vec<T>,
    embed_w: usize,
    embed_b: usize,
    layers: Vec<LayerIdx>,
    head_w: usize,
    head_b: usize,
}

struct LayerCache<T> {
    x: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    probs: Vec<T>,
    ctx: Vec<T>,
    ln1: LayerNormCache<T>,
    e1: Vec<T>,
    h1: Vec<T>,
    g1: Vec<T>,
    ln2: LayerNormCache<T>,
}

/// Activations recorded by a forward pass.
pub struct RegressorCache<T> {
    tokens: Vec<T>,
    layers: Vec<LayerCache<T>>,
    final_tokens: Vec<T>,
    pooled: Vec<T>,
    pub output: Vec<T>,
}

impl<T> RegressorCache<T> {
    /// Attention weights of layer `l`, laid out `[head][query][key]`.
    pub fn attention(&self, l: usize) -> &[T] {
        &self.layers[l].probs
    }

    /// Output of layer `l` (after its second layer-norm), `[token][D]`.
    pub fn layer_output(&self, l: usize) -> &[T] {
        if l + 1 < self.layers.len() {
            &self.layers[l + 1].x
        } else {
            &self.final_tokens
        }
    }

    pub fn first_layer_norm_output(&self, l: usize) -> &[T] {
        &self.layers[l].e1
    }
}

fn sinusoidal<T: Real>(n_tokens: usize, d: usize) -> Vec<T> {
    let mut pe = vec![T::zero(); n_tokens * d];
    for t in 0..n_tokens {
        for i in 0..d / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / d as f64);
            pe[t * d + 2 * i] = T::lit((t as f64 * freq).sin());
            pe[t * d + 2 * i + 1] = T::lit((t as f64 * freq).cos());
        }
    }
    pe
}

impl<T: Real> RegressorModel<T> {
    /// Glorot-initialised weights, unit layer-norm gains, zero biases.
    pub fn new(cfg: RegressorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.d_model;
        let ff = cfg.d_ff();
        let tok = cfg.token_dim();
        let mut p = ParamSet::default();
        let embed_w = p.push("embed.weight", Tensor::glorot(vec![tok, d], tok, d, &mut rng));
        let embed_b = p.push("embed.bias", Tensor::zeros(vec![d]));
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let n = |s: &str| format!("layer{l}.{s}");
            let sq = |name: &str, p: &mut ParamSet<T>, r: &mut ChaCha8Rng| {
                p.push(n(name), Tensor::glorot(vec![d, d], d, d, r))
            };
            let wq = sq("attn.wq", &mut p, &mut rng);
            let bq = p.push(n("attn.bq"), Tensor::zeros(vec![d]));
            let wk = sq("attn.wk", &mut p, &mut rng);
            let wv = sq("attn.wv", &mut p, &mut rng);
            let bv = p.push(n("attn.bv"), Tensor::zeros(vec![d]));
            let wo = sq("attn.wo", &mut p, &mut rng);
            let bo = p.push(n("attn.bo"), Tensor::zeros(vec![d]));
            let ln1_g = p.push(n("ln1.gamma"), Tensor::filled(vec![d], T::one()));
            let ln1_b = p.push(n("ln1.beta"), Tensor::zeros(vec![d]));
            let w1 = p.push(n("ff.w1"), Tensor::glorot(vec![d, ff], d, ff, &mut rng));
            let b1 = p.push(n("ff.b1"), Tensor::zeros(vec![ff]));
            let w2 = p.push(n("ff.w2"), Tensor::glorot(vec![ff, d], ff, d, &mut rng));
            let b2 = p.push(n("ff.b2"), Tensor::zeros(vec![d]));
            let ln2_g = p.push(n("ln2.gamma"), Tensor::filled(vec![d], T::one()));
            let ln2_b = p.push(n("ln2.beta"), Tensor::zeros(vec![d]));
            layers.push(LayerIdx { wq, bq, wk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b });
        }
        let head_w = p.push("head.weight", Tensor::glorot(vec![d, cfg.n_emg_ch], d, cfg.n_emg_ch, &mut rng));
        let head_b = p.push("head.bias", Tensor::zeros(vec![cfg.n_emg_ch]));
        Ok(Self {
            pe: sinusoidal(cfg.n_tokens(), d),
            input_norm: Standardizer::identity(cfg.n_eeg_ch),
            target_norm: Standardizer::identity(cfg.n_emg_ch),
            test_trials: Vec::new(),
            cfg,
            params: p,
            embed_w,
            embed_b,
            layers,
            head_w,
            head_b,
        })
    }

    pub fn config(&self) -> &RegressorConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    /// Sets the projection head to zero weight; output becomes the bias.
    pub fn zero_head(&mut self) {
        let hw = self.head_w;
        self.params.get_mut(hw).values_mut().iter_mut().for_each(|v| *v = T::zero());
    }

    /// Standardises and patches a raw EEG window into `[tokens × C·P]`.
    pub fn tokenize(&self, x: &[Vec<T>]) -> Result<Vec<T>> {
        let c = self.cfg.n_eeg_ch;
        let w = self.cfg.window;
        let p = self.cfg.patch;
        if x.len() != c || x.iter().any(|r| r.len() != w) {
            return Err(Error::Shape(format!(
                "expected window [{c} × {w}], got [{} × {}]",
                x.len(),
                x.first().map_or(0, Vec::len)
            )));
        }
        let n_tok = self.cfg.n_tokens();
        let dim = self.cfg.token_dim();
        let mut tokens = vec![T::zero(); n_tok * dim];
        for (ch, row) in x.iter().enumerate() {
            for t in 0..n_tok {
                for k in 0..p {
                    tokens[t * dim + ch * p + k] = self.input_norm.apply(ch, row[t * p + k]);
                }
            }
        }
        Ok(tokens)
    }

    /// Raw model output (standardised target units) for one window.
    pub fn forward(&self, x: &[Vec<T>]) -> Result<Vec<T>> {
        let tokens = self.tokenize(x)?;
        Ok(self.forward_tokens(tokens).output)
    }

    /// De-standardised envelope prediction, clamped at zero.
    pub fn predict_envelope(&self, x: &[Vec<T>]) -> Result<Vec<T>> {
        let out = self.forward(x)?;
        Ok(self.target_norm.invert_vec(&out).into_iter().map(|v| v.max(T::zero())).collect())
    }

    pub fn forward_tokens(&self, tokens: Vec<T>) -> RegressorCache<T> {
        let n = self.cfg.n_tokens();
        let d = self.cfg.d_model;
        let p = &self.params;
        let mut e = matmul(&tokens, p.v(self.embed_w), n, self.cfg.token_dim(), d);
        add_row_bias(&mut e, p.v(self.embed_b));
        for (v, pe) in e.iter_mut().zip(&self.pe) {
            *v += *pe;
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for idx in &self.layers {
            let (out, cache) = self.layer_forward(idx, e);
            layers.push(cache);
            e = out;
        }
        let inv_n = T::one() / T::from_usize_lossy(n);
        let mut pooled = vec![T::zero(); d];
        col_sum_acc(&mut pooled, &e);
        pooled.iter_mut().for_each(|v| *v *= inv_n);
        let mut output = matmul(&pooled, p.v(self.head_w), 1, d, self.cfg.n_emg_ch);
        add_row_bias(&mut output, p.v(self.head_b));
        RegressorCache { tokens, layers, final_tokens: e, pooled, output }
    }

    fn layer_forward(&self, idx: &LayerIdx, x: Vec<T>) -> (Vec<T>, LayerCache<T>) {
        let n = self.cfg.n_tokens();
        let d = self.cfg.d_model;
        let h = self.cfg.n_heads;
        let dh = d / h;
        let ff = self.cfg.d_ff();
        let p = &self.params;
        let scale = T::one() / T::from_usize_lossy(dh).sqrt();

        let mut q = matmul(&x, p.v(idx.wq), n, d, d);
        add_row_bias(&mut q, p.v(idx.bq));
        let k = matmul(&x, p.v(idx.wk), n, d, d);
        let mut v = matmul(&x, p.v(idx.wv), n, d, d);
        add_row_bias(&mut v, p.v(idx.bv));

        let mut probs = vec![T::zero(); h * n * n];
        let mut ctx = vec![T::zero(); n * d];
        for head in 0..h {
            let off = head * dh;
            for i in 0..n {
                let row = &mut probs[(head * n + i) * n..(head * n + i + 1) * n];
                let qi = &q[i * d + off..i * d + off + dh];
                for (j, r) in row.iter_mut().enumerate() {
                    let kj = &k[j * d + off..j * d + off + dh];
                    *r = scale * qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<T>();
                }
                softmax_in_place(row);
                let out = &mut ctx[i * d + off..i * d + off + dh];
                for (j, &pij) in row.iter().enumerate() {
                    let vj = &v[j * d + off..j * d + off + dh];
                    for (o, &vv) in out.iter_mut().zip(vj) {
                        *o += pij * vv;
                    }
                }
            }
        }
        let mut a = matmul(&ctx, p.v(idx.wo), n, d, d);
        add_row_bias(&mut a, p.v(idx.bo));
        for (r, &xv) in a.iter_mut().zip(&x) {
            *r += xv;
        }
        let (e1, ln1) = layer_norm(&a, p.v(idx.ln1_g), p.v(idx.ln1_b));

        let mut h1 = matmul(&e1, p.v(idx.w1), n, d, ff);
        add_row_bias(&mut h1, p.v(idx.b1));
        let g1: Vec<T> = h1.iter().map(|&v| gelu(v)).collect();
        let mut f = matmul(&g1, p.v(idx.w2), n, ff, d);
        add_row_bias(&mut f, p.v(idx.b2));
        for (r, &ev) in f.iter_mut().zip(&e1) {
            *r += ev;
        }
        let (e2, ln2) = layer_norm(&f, p.v(idx.ln2_g), p.v(idx.ln2_b));
        (e2, LayerCache { x, q, k, v, probs, ctx, ln1, e1, h1, g1, ln2 })
    }

    /// Gradients of a scalar loss given `dL/d(output)`.
    pub fn backward(&self, cache: &RegressorCache<T>, d_out: &[T]) -> Grads<T> {
        let n = self.cfg.n_tokens();
        let d = self.cfg.d_model;
        let p = &self.params;
        let mut g = p.zero_grads();

        // head
        matmul_at_b_acc(g.g(self.head_w), &cache.pooled, d_out, 1, d, self.cfg.n_emg_ch);
        col_sum_acc(g.g(self.head_b), d_out);
        let d_pooled = matmul_a_bt(d_out, p.v(self.head_w), 1, self.cfg.n_emg_ch, d);

        let inv_n = T::one() / T::from_usize_lossy(n);
        let mut de: Vec<T> = (0..n * d).map(|i| d_pooled[i % d] * inv_n).collect();

        for (idx, lc) in self.layers.iter().zip(&cache.layers).rev() {
            de = self.layer_backward(idx, lc, &de, &mut g);
        }

        matmul_at_b_acc(g.g(self.embed_w), &cache.tokens, &de, n, self.cfg.token_dim(), d);
        col_sum_acc(g.g(self.embed_b), &de);
        g
    }

    fn layer_backward(&self, idx: &LayerIdx, c: &LayerCache<T>, de2: &[T], g: &mut Grads<T>) -> Vec<T> {
        let n = self.cfg.n_tokens();
        let d = self.cfg.d_model;
        let h = self.cfg.n_heads;
        let dh = d / h;
        let ff = self.cfg.d_ff();
        let p = &self.params;
        let scale = T::one() / T::from_usize_lossy(dh).sqrt();

        let (mut dgam, mut dbet) = (vec![T::zero(); d], vec![T::zero(); d]);
        let dr2 = layer_norm_backward(de2, p.v(idx.ln2_g), &c.ln2, &mut dgam, &mut dbet);
        add(g.g(idx.ln2_g), &dgam);
        add(g.g(idx.ln2_b), &dbet);

        // feed-forward
        matmul_at_b_acc(g.g(idx.w2), &c.g1, &dr2, n, ff, d);
        col_sum_acc(g.g(idx.b2), &dr2);
        let mut dh1 = matmul_a_bt(&dr2, p.v(idx.w2), n, d, ff);
        for (dv, &hv) in dh1.iter_mut().zip(&c.h1) {
            *dv *= gelu_grad(hv);
        }
        matmul_at_b_acc(g.g(idx.w1), &c.e1, &dh1, n, d, ff);
        col_sum_acc(g.g(idx.b1), &dh1);
        let mut de1 = matmul_a_bt(&dh1, p.v(idx.w1), n, ff, d);
        for (a, &b) in de1.iter_mut().zip(&dr2) {
            *a += b;
        }

        let (mut dgam, mut dbet) = (vec![T::zero(); d], vec![T::zero(); d]);
        let dr1 = layer_norm_backward(&de1, p.v(idx.ln1_g), &c.ln1, &mut dgam, &mut dbet);
        add(g.g(idx.ln1_g), &dgam);
        add(g.g(idx.ln1_b), &dbet);

        // attention output projection
        matmul_at_b_acc(g.g(idx.wo), &c.ctx, &dr1, n, d, d);
        col_sum_acc(g.g(idx.bo), &dr1);
        let dctx = matmul_a_bt(&dr1, p.v(idx.wo), n, d, d);

        let mut dq = vec![T::zero(); n * d];
        let mut dk = vec![T::zero(); n * d];
        let mut dv = vec![T::zero(); n * d];
        let mut dp = vec![T::zero(); n];
        for head in 0..h {
            let off = head * dh;
            for i in 0..n {
                let probs = &c.probs[(head * n + i) * n..(head * n + i + 1) * n];
                let dci = &dctx[i * d + off..i * d + off + dh];
                for j in 0..n {
                    let vj = &c.v[j * d + off..j * d + off + dh];
                    dp[j] = dci.iter().zip(vj).map(|(&a, &b)| a * b).sum();
                    let dvj = &mut dv[j * d + off..j * d + off + dh];
                    for (o, &dcv) in dvj.iter_mut().zip(dci) {
                        *o += probs[j] * dcv;
                    }
                }
                let dot: T = probs.iter().zip(&dp).map(|(&a, &b)| a * b).sum();
                for j in 0..n {
                    let ds = probs[j] * (dp[j] - dot) * scale;
                    for cc in 0..dh {
                        dq[i * d + off + cc] += ds * c.k[j * d + off + cc];
                        dk[j * d + off + cc] += ds * c.q[i * d + off + cc];
                    }
                }
            }
        }
        matmul_at_b_acc(g.g(idx.wq), &c.x, &dq, n, d, d);
        col_sum_acc(g.g(idx.bq), &dq);
        matmul_at_b_acc(g.g(idx.wk), &c.x, &dk, n, d, d);
        matmul_at_b_acc(g.g(idx.wv), &c.x, &dv, n, d, d);
        col_sum_acc(g.g(idx.bv), &dv);

        let mut dx = dr1;
        for (w, dm) in [(idx.wq, &dq), (idx.wk, &dk), (idx.wv, &dv)] {
            let part = matmul_a_bt(dm, p.v(w), n, d, d);
            for (a, b) in dx.iter_mut().zip(part) {
                *a += b;
            }
        }
        dx
    }

    /// Mean squared error over outputs for one pre-tokenised example.
    pub fn mse(&self, tokens: &[T], target: &[T]) -> T {
        let out = self.forward_tokens(tokens.to_vec()).output;
        mse(&out, target)
    }

    /// MSE and its parameter gradients for one pre-tokenised example.
    pub fn mse_grads(&self, tokens: &[T], target: &[T]) -> (T, Grads<T>) {
        let cache = self.forward_tokens(tokens.to_vec());
        let m = T::from_usize_lossy(target.len());
        let d_out: Vec<T> = cache
            .output
            .iter()
            .zip(target)
            .map(|(&o, &y)| T::lit(2.0) * (o - y) / m)
            .collect();
        (mse(&cache.output, target), self.backward(&cache, &d_out))
    }

    pub(crate) fn from_parts(
        cfg: RegressorConfig,
        params: ParamSet<T>,
        input_norm: Standardizer<T>,
        target_norm: Standardizer<T>,
        test_trials: Vec<usize>,
    ) -> Result<Self> {
        let mut m = Self::new(cfg, 0)?;
        if m.params.names() != params.names() {
            return Err(Error::CorruptModel("tensor list does not match hyperparameters".into()));
        }
        for (i, (_, t)) in params.iter().enumerate() {
            if t.shape() != m.params.get(i).shape() {
                return Err(Error::CorruptModel(format!("tensor {} has wrong shape", params.name(i))));
            }
        }
        if input_norm.len() != m.cfg.n_eeg_ch || target_norm.len() != m.cfg.n_emg_ch {
            return Err(Error::CorruptModel("standardisation statistics have wrong length".into()));
        }
        m.params = params;
        m.input_norm = input_norm;
        m.target_norm = target_norm;
        m.test_trials = test_trials;
        Ok(m)
    }
}

fn add<T: Real>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub(crate) fn mse<T: Real>(out: &[T], target: &[T]) -> T {
    let m = T::from_usize_lossy(target.len());
    out.iter().zip(target).map(|(&o, &y)| (o - y) * (o - y)).sum::<T>() / m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_window(cfg: &RegressorConfig, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cfg.n_eeg_ch).map(|_| (0..cfg.window).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn zero_head_outputs_bias() {
        let cfg = RegressorConfig::standard(16, 6);
        let mut m = RegressorModel::<f64>::new(cfg.clone(), 3).unwrap();
        m.zero_head();
        let hb = m.head_b;
        m.params.get_mut(hb).values_mut().copy_from_slice(&[0.5, -1.0, 2.0, 0.0, 3.25, 7.0]);
        for s in 0..3 {
            let out = m.forward(&random_window(&cfg, s)).unwrap();
            assert_eq!(out, vec![0.5, -1.0, 2.0, 0.0, 3.25, 7.0]);
        }
    }

    #[test]
    fn deterministic_forward() {
        let cfg = RegressorConfig::standard(16, 6);
        let x = random_window(&cfg, 9);
        let a = RegressorModel::<f64>::new(cfg.clone(), 5).unwrap().forward(&x).unwrap();
        let b = RegressorModel::<f64>::new(cfg, 5).unwrap().forward(&x).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn token_order_matters() {
        let cfg = RegressorConfig::standard(4, 2);
        let m = RegressorModel::<f64>::new(cfg.clone(), 1).unwrap();
        let x = random_window(&cfg, 2);
        let mut swapped = x.clone();
        // exchange token 0 and token 7 on every channel
        for row in &mut swapped {
            for k in 0..cfg.patch {
                row.swap(k, 7 * cfg.patch + k);
            }
        }
        let a = m.forward(&x).unwrap();
        let b = m.forward(&swapped).unwrap();
        let diff = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff > 1e-6, "{diff}");
    }

    #[test]
    fn shape_mismatch() {
        let cfg = RegressorConfig::standard(4, 2);
        let m = RegressorModel::<f64>::new(cfg, 1).unwrap();
        assert!(matches!(m.forward(&vec![vec![0.0; 200]; 3]), Err(Error::Shape(_))));
        assert!(matches!(m.forward(&vec![vec![0.0; 199]; 4]), Err(Error::Shape(_))));
    }

    #[test]
    fn attention_rows_and_layer_norm() {
        let cfg = RegressorConfig::standard(16, 6);
        let m = RegressorModel::<f64>::new(cfg.clone(), 8).unwrap();
        let cache = m.forward_tokens(m.tokenize(&random_window(&cfg, 4)).unwrap());
        let n = cfg.n_tokens();
        for l in 0..cfg.n_layers {
            for row in cache.attention(l).chunks(n) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
            // unit gamma, zero beta at init: outputs are the normalised rows
            for out in [cache.first_layer_norm_output(l), cache.layer_output(l)] {
                for tok in out.chunks(cfg.d_model) {
                    let mean = tok.iter().sum::<f64>() / cfg.d_model as f64;
                    let var = tok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cfg.d_model as f64;
                    assert!(mean.abs() <= 1e-6);
                    assert!((var - 1.0).abs() <= 1e-3);
                }
            }
        }
    }

    #[test]
    fn predict_clamps_and_destandardises() {
        let cfg = RegressorConfig::standard(4, 3);
        let mut m = RegressorModel::<f64>::new(cfg.clone(), 1).unwrap();
        m.zero_head();
        let hb = m.head_b;
        m.params.get_mut(hb).values_mut().copy_from_slice(&[-5.0, 1.0, 0.0]);
        m.target_norm = Standardizer { mean: vec![1.0, 1.0, 2.0], std: vec![0.5, 2.0, 1.0] };
        let out = m.predict_envelope(&random_window(&cfg, 0)).unwrap();
        assert_eq!(out, vec![0.0, 3.0, 2.0]);
    }
}
