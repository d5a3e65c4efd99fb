//! Mini-batch training of the regressor and the classifier.
//!
//! Per-example gradients are computed in parallel over fixed sub-chunks of a
//! batch and summed in chunk order, so results do not depend on the number
//! of worker threads.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{argmax, ClassifierConfig, ClassifierModel, N_CLASSES};
use super::norm::Standardizer;
use super::optim::Adam;
use super::regressor::{RegressorConfig, RegressorModel};
use super::tensor::{Grads, ParamSet};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::session::WindowPair;

pub const MIN_WINDOWS: usize = 100;
pub const MIN_SEQUENCES_PER_CLASS: usize = 30;
const SUB_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Train / validation / test fractions, applied to whole trials.
    pub split: [f64; 3],
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            split: [0.7, 0.15, 0.15],
            patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.split.iter().sum();
        if self.split.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("split fractions {:?} must be in [0,1] and sum to 1", self.split)));
        }
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("epochs, batch size and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch losses; index 0 is the untrained model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }
}

/// Disjoint trial id sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles the distinct ids with `seed` and cuts them by `fractions`.
/// Every non-zero fraction receives at least one id.
pub fn split_trials(ids: &[usize], fractions: [f64; 3], seed: u64) -> Result<TrialSplit> {
    let mut ids: Vec<usize> = ids.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let needed = fractions.iter().filter(|&&f| f > 0.0).count();
    if ids.len() < needed {
        return Err(Error::InsufficientData(format!("{} trial(s) cannot fill a {needed}-way split", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len() as f64;
    let take = |f: f64| if f > 0.0 { ((n * f).round() as usize).max(1) } else { 0 };
    let n_val = take(fractions[1]);
    let mut n_test = take(fractions[2]);
    if n_val + n_test >= ids.len() && fractions[0] > 0.0 {
        n_test = ids.len() - n_val - 1;
    }
    let test = ids[..n_test].to_vec();
    let val = ids[n_test..n_test + n_val].to_vec();
    let train = ids[n_test + n_val..].to_vec();
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    Ok(TrialSplit { train: sorted(train), val: sorted(val), test: sorted(test) })
}

/// Summed loss and gradients over `idx`, computed in parallel but reduced
/// in a fixed order.
fn batch_grads<T, F>(params: &ParamSet<T>, idx: &[usize], f: F) -> (T, Grads<T>)
where
    T: Real,
    F: Fn(usize) -> (T, Grads<T>) + Sync,
{
    let parts: Vec<(T, Grads<T>)> = idx
        .par_chunks(SUB_CHUNK)
        .map(|chunk| {
            let mut acc = params.zero_grads();
            let mut loss = T::zero();
            for &i in chunk {
                let (l, g) = f(i);
                loss += l;
                acc.add_assign(&g);
            }
            (loss, acc)
        })
        .collect();
    let mut total = params.zero_grads();
    let mut loss = T::zero();
    for (l, g) in &parts {
        loss += *l;
        total.add_assign(g);
    }
    (loss, total)
}

fn mean_loss<T: Real, F: Fn(usize) -> T + Sync>(idx: &[usize], f: F) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    let parts: Vec<T> = idx.par_chunks(SUB_CHUNK).map(|c| c.iter().map(|&i| f(i)).sum()).collect();
    parts.into_iter().sum::<T>().as_f64() / idx.len() as f64
}

fn fit_channels<T: Real>(n: usize, rows: impl Iterator<Item = (usize, T)>) -> Standardizer<T> {
    let mut sum = vec![0.0f64; n];
    let mut sq = vec![0.0f64; n];
    let mut count = vec![0usize; n];
    let rows: Vec<(usize, f64)> = rows.map(|(c, v)| (c, v.as_f64())).collect();
    for &(c, v) in &rows {
        sum[c] += v;
        count[c] += 1;
    }
    let mean: Vec<f64> = (0..n).map(|c| sum[c] / count[c].max(1) as f64).collect();
    for &(c, v) in &rows {
        sq[c] += (v - mean[c]) * (v - mean[c]);
    }
    let std = (0..n)
        .map(|c| {
            let s = (sq[c] / count[c].max(1) as f64).sqrt();
            T::lit(if s > 1e-12 { s } else { 1.0 })
        })
        .collect();
    Standardizer { mean: mean.into_iter().map(T::lit).collect(), std }
}

/// Generic early-stopping loop shared by both models.
struct Loop<'a> {
    cfg: &'a TrainConfig,
    rng: ChaCha8Rng,
}

impl Loop<'_> {
    fn run<T, B, S, E>(
        &mut self,
        params: &mut ParamSet<T>,
        (train_idx, val_idx): (&[usize], &[usize]),
        mut batches: B,
        step: S,
        eval: E,
    ) -> Result<TrainHistory>
    where
        T: Real,
        B: FnMut(&mut ChaCha8Rng) -> Vec<Vec<usize>>,
        S: Fn(&ParamSet<T>, &[usize]) -> (T, Grads<T>),
        E: Fn(&ParamSet<T>, &[usize]) -> f64,
    {
        let cfg = self.cfg;
        let mut opt = Adam::new(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
        let mut history = TrainHistory {
            train_loss: vec![eval(params, train_idx)],
            val_loss: vec![eval(params, val_idx)],
            best_epoch: 0,
            stopped_early: false,
        };
        let mut best = params.clone();
        let mut since_best = 0;
        for epoch in 1..=cfg.epochs {
            let mut total = 0.0;
            let mut count = 0usize;
            for batch in batches(&mut self.rng) {
                let (loss, mut g) = step(params, &batch);
                g.scale(T::one() / T::from_usize_lossy(batch.len()));
                if !g.all_finite() || !loss.is_finite() {
                    return Err(Error::CheckFailed(format!("non-finite loss or gradient in epoch {epoch}")));
                }
                opt.step(params, &g);
                total += loss.as_f64();
                count += batch.len();
            }
            let v = eval(params, val_idx);
            history.train_loss.push(total / count.max(1) as f64);
            history.val_loss.push(v);
            log::debug!("epoch {epoch}: train {:.5} val {v:.5}", total / count.max(1) as f64);
            if v < history.val_loss[history.best_epoch] {
                history.best_epoch = epoch;
                best = params.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
        *params = best;
        Ok(history)
    }
}

fn shuffled_batches(rng: &mut ChaCha8Rng, idx: &[usize], batch: usize) -> Vec<Vec<usize>> {
    let mut order = idx.to_vec();
    order.shuffle(rng);
    order.chunks(batch).map(<[usize]>::to_vec).collect()
}

/// A trained regressor with the split it was trained on.
#[derive(Debug, Clone)]
pub struct RegressorFit<T> {
    pub model: RegressorModel<T>,
    pub history: TrainHistory,
    pub split: TrialSplit,
}

/// Trains on windows of the train trials, early-stopping on the validation
/// trials. Inputs are standardised per EEG channel and targets per EMG
/// channel; both sets of statistics travel with the model.
pub fn train_regressor<T: Real>(
    windows: &[WindowPair<T>],
    model_cfg: RegressorConfig,
    cfg: &TrainConfig,
) -> Result<RegressorFit<T>> {
    cfg.validate()?;
    if windows.len() < MIN_WINDOWS {
        return Err(Error::InsufficientData(format!("{} windows, need at least {MIN_WINDOWS}", windows.len())));
    }
    let ids: Vec<usize> = windows.iter().map(|w| w.trial_id).collect();
    let split = split_trials(&ids, cfg.split, cfg.seed)?;
    let select = |set: &[usize]| -> Vec<usize> {
        (0..windows.len()).filter(|&i| set.binary_search(&windows[i].trial_id).is_ok()).collect()
    };
    let (train_idx, val_idx) = (select(&split.train), select(&split.val));
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::InsufficientData("training and validation sets must both be non-empty".into()));
    }

    let mut model = RegressorModel::new(model_cfg.clone(), cfg.seed)?;
    let in_ch = model_cfg.n_eeg_ch;
    model.input_norm = fit_channels(
        in_ch,
        train_idx.iter().flat_map(|&i| windows[i].x.iter().enumerate().flat_map(|(c, r)| r.iter().map(move |&v| (c, v)))),
    );
    model.target_norm =
        fit_channels(model_cfg.n_emg_ch, train_idx.iter().flat_map(|&i| windows[i].y.iter().copied().enumerate()));
    model.test_trials = split.test.clone();
    model.zero_head();

    let tokens: Vec<Vec<T>> = windows.par_iter().map(|w| model.tokenize(&w.x)).collect::<Result<_>>()?;
    let targets: Vec<Vec<T>> = windows.iter().map(|w| model.target_norm.apply_vec(&w.y)).collect();

    let template = model.clone();
    let with = |p: &ParamSet<T>| {
        let mut m = template.clone();
        m.params = p.clone();
        m
    };
    let mut params = model.params.clone();
    let batch = cfg.batch_size;
    let history = Loop { cfg, rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)) }.run(
        &mut params,
        (&train_idx, &val_idx),
        |rng| shuffled_batches(rng, &train_idx, batch),
        |p, b| {
            let m = with(p);
            batch_grads(p, b, |i| m.mse_grads(&tokens[i], &targets[i]))
        },
        |p, idx| {
            let m = with(p);
            mean_loss(idx, |i| m.mse(&tokens[i], &targets[i]))
        },
    )?;
    model.params = params;
    Ok(RegressorFit { model, history, split })
}

/// A trained classifier and the held-out sequence indices.
#[derive(Debug, Clone)]
pub struct ClassifierFit<T> {
    pub model: ClassifierModel<T>,
    pub history: TrainHistory,
    pub test: Vec<usize>,
}

/// Stratified split of sequence indices: each class is cut by `fractions`.
fn stratified(labels: &[usize], fractions: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let mut out: [Vec<usize>; 3] = Default::default();
    for class in 0..N_CLASSES {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let s = split_trials(&members, fractions, seed.wrapping_add(class as u64))?;
        out[0].extend(s.train);
        out[1].extend(s.val);
        out[2].extend(s.test);
    }
    for part in &mut out {
        part.sort_unstable();
    }
    Ok(out)
}

/// Softmax cross-entropy training with class-balanced batches.
pub fn train_classifier<T: Real>(
    sequences: &[(Vec<Vec<T>>, usize)],
    model_cfg: ClassifierConfig,
    cfg: &TrainConfig,
) -> Result<ClassifierFit<T>> {
    cfg.validate()?;
    let labels: Vec<usize> = sequences.iter().map(|s| s.1).collect();
    for class in 0..N_CLASSES {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < MIN_SEQUENCES_PER_CLASS {
            return Err(Error::InsufficientData(format!(
                "class {class} has {n} sequences, need at least {MIN_SEQUENCES_PER_CLASS}"
            )));
        }
    }
    if labels.iter().any(|&l| l >= N_CLASSES) {
        return Err(Error::InvalidArgument("label out of range".into()));
    }
    let [train_idx, val_idx, test] = stratified(&labels, cfg.split, cfg.seed)?;
    if val_idx.is_empty() {
        return Err(Error::InsufficientData("validation set is empty".into()));
    }

    let mut model = ClassifierModel::new(model_cfg.clone(), cfg.seed)?;
    model.input_norm = fit_channels(
        model_cfg.n_channels,
        train_idx.iter().flat_map(|&i| sequences[i].0.iter().enumerate().flat_map(|(c, r)| r.iter().map(move |&v| (c, v)))),
    );
    let inputs: Vec<Vec<T>> = sequences.iter().map(|(s, _)| model.prepare(s)).collect::<Result<_>>()?;

    let by_class: Vec<Vec<usize>> =
        (0..N_CLASSES).map(|c| train_idx.iter().copied().filter(|&i| labels[i] == c).collect()).collect();
    let per_class = (cfg.batch_size / N_CLASSES).max(1);
    let n_batches = train_idx.len().div_ceil(per_class * N_CLASSES);

    let template = model.clone();
    let with = |p: &ParamSet<T>| {
        let mut m = template.clone();
        m.params = p.clone();
        m
    };
    let mut params = model.params.clone();
    let mut cursors = vec![0usize; N_CLASSES];
    let mut orders = by_class.clone();
    let history = Loop { cfg, rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)) }.run(
        &mut params,
        (&train_idx, &val_idx),
        |rng| {
            (0..n_batches)
                .map(|_| {
                    let mut batch = Vec::with_capacity(per_class * N_CLASSES);
                    for c in 0..N_CLASSES {
                        for _ in 0..per_class {
                            if cursors[c] == 0 {
                                orders[c].shuffle(rng);
                            }
                            batch.push(orders[c][cursors[c]]);
                            cursors[c] = (cursors[c] + 1) % orders[c].len();
                        }
                    }
                    batch
                })
                .collect()
        },
        |p, b| {
            let m = with(p);
            batch_grads(p, b, |i| m.cross_entropy_grads(&inputs[i], labels[i]))
        },
        |p, idx| {
            let m = with(p);
            mean_loss(idx, |i| m.cross_entropy(&inputs[i], labels[i]))
        },
    )?;
    model.params = params;
    Ok(ClassifierFit { model, history, test })
}

/// Fraction of `idx` the classifier labels correctly.
pub fn classifier_accuracy<T: Real>(
    model: &ClassifierModel<T>,
    sequences: &[(Vec<Vec<T>>, usize)],
    idx: &[usize],
) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::InsufficientData("no sequences to score".into()));
    }
    let mut hits = 0;
    for &i in idx {
        let (seq, label) = &sequences[i];
        if argmax(&model.logits(seq)?) == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}
