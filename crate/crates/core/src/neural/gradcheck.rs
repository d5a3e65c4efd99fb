//! Central finite-difference verification of the analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::classifier::{ClassifierConfig, ClassifierModel, N_CLASSES};
use super::regressor::{RegressorConfig, RegressorModel};
use super::tensor::{Grads, ParamSet};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
const BATCH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Regressor,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub kind: ModelKind,
    pub seed: u64,
    pub max_relative_error: f64,
    /// `tensor[index]` where the largest error occurred.
    pub worst: String,
    pub n_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= TOLERANCE
    }
}

/// Checks every parameter of a tiny model of `kind`.
pub fn grad_check(kind: ModelKind, seed: u64, eps: f64) -> Result<GradCheckReport> {
    run(kind, seed, eps, false)
}

/// Same as [`grad_check`] but doubles the largest analytic gradient entry
/// before comparing; used to show faults are caught.
pub fn grad_check_with_fault(kind: ModelKind, seed: u64, eps: f64) -> Result<GradCheckReport> {
    run(kind, seed, eps, true)
}

trait Probe {
    fn params_mut(&mut self) -> &mut ParamSet<f64>;
    fn params(&self) -> &ParamSet<f64>;
    fn loss(&self) -> f64;
    fn grads(&self) -> Grads<f64>;
}

struct RegressorProbe {
    model: RegressorModel<f64>,
    data: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Probe for RegressorProbe {
    fn params_mut(&mut self) -> &mut ParamSet<f64> {
        self.model.params_mut()
    }
    fn params(&self) -> &ParamSet<f64> {
        self.model.params()
    }
    fn loss(&self) -> f64 {
        self.data.iter().map(|(x, y)| self.model.mse(x, y)).sum::<f64>() / self.data.len() as f64
    }
    fn grads(&self) -> Grads<f64> {
        let mut acc = self.model.params().zero_grads();
        for (x, y) in &self.data {
            acc.add_assign(&self.model.mse_grads(x, y).1);
        }
        acc.scale(1.0 / self.data.len() as f64);
        acc
    }
}

struct ClassifierProbe {
    model: ClassifierModel<f64>,
    data: Vec<(Vec<f64>, usize)>,
}

impl Probe for ClassifierProbe {
    fn params_mut(&mut self) -> &mut ParamSet<f64> {
        self.model.params_mut()
    }
    fn params(&self) -> &ParamSet<f64> {
        self.model.params()
    }
    fn loss(&self) -> f64 {
        self.data.iter().map(|(x, y)| self.model.cross_entropy(x, *y)).sum::<f64>() / self.data.len() as f64
    }
    fn grads(&self) -> Grads<f64> {
        let mut acc = self.model.params().zero_grads();
        for (x, y) in &self.data {
            acc.add_assign(&self.model.cross_entropy_grads(x, *y).1);
        }
        acc.scale(1.0 / self.data.len() as f64);
        acc
    }
}

fn normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn build(kind: ModelKind, seed: u64) -> Result<Box<dyn Probe>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok(match kind {
        ModelKind::Regressor => {
            let cfg = RegressorConfig::tiny(3, 2);
            let model = RegressorModel::new(cfg.clone(), seed)?;
            let data = (0..BATCH)
                .map(|_| (normal(&mut rng, cfg.n_tokens() * cfg.token_dim()), normal(&mut rng, cfg.n_emg_ch)))
                .collect();
            Box::new(RegressorProbe { model, data })
        }
        ModelKind::Classifier => {
            let cfg = ClassifierConfig::tiny(3);
            let model = ClassifierModel::new(cfg.clone(), seed)?;
            let data = (0..BATCH)
                .map(|i| (normal(&mut rng, cfg.n_channels * cfg.n_steps), i % N_CLASSES))
                .collect();
            Box::new(ClassifierProbe { model, data })
        }
    })
}

fn run(kind: ModelKind, seed: u64, eps: f64, inject_fault: bool) -> Result<GradCheckReport> {
    let mut probe = build(kind, seed)?;
    let base = probe.loss();
    if !base.is_finite() {
        return Err(Error::CheckFailed(format!("non-finite loss {base}")));
    }
    let mut analytic = probe.grads();
    if inject_fault {
        let (ti, ei) = largest_entry(&analytic);
        analytic.0[ti][ei] *= 2.0;
    }

    let mut worst = (0.0f64, String::new());
    let mut n_checked = 0;
    for ti in 0..probe.params().len() {
        for ei in 0..probe.params().get(ti).len() {
            let orig = probe.params().get(ti).values()[ei];
            probe.params_mut().get_mut(ti).values_mut()[ei] = orig + eps;
            let up = probe.loss();
            probe.params_mut().get_mut(ti).values_mut()[ei] = orig - eps;
            let down = probe.loss();
            probe.params_mut().get_mut(ti).values_mut()[ei] = orig;
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::CheckFailed(format!("non-finite loss perturbing {}", probe.params().name(ti))));
            }
            let numeric = (up - down) / (2.0 * eps);
            let err = (analytic.0[ti][ei] - numeric).abs() / numeric.abs().max(1e-8);
            if err > worst.0 {
                worst = (err, format!("{}[{ei}]", probe.params().name(ti)));
            }
            n_checked += 1;
        }
    }
    Ok(GradCheckReport { kind, seed, max_relative_error: worst.0, worst: worst.1, n_checked })
}

fn largest_entry(g: &Grads<f64>) -> (usize, usize) {
    let mut best = (0, 0, -1.0);
    for (ti, t) in g.0.iter().enumerate() {
        for (ei, v) in t.iter().enumerate() {
            if v.abs() > best.2 {
                best = (ti, ei, v.abs());
            }
        }
    }
    (best.0, best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regressor_seed_zero() {
        let r = grad_check(ModelKind::Regressor, 0, DEFAULT_EPS).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.n_checked > 500);
    }

    #[test]
    fn classifier_seed_zero() {
        let r = grad_check(ModelKind::Classifier, 0, DEFAULT_EPS).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn injected_fault_is_detected() {
        for kind in [ModelKind::Regressor, ModelKind::Classifier] {
            let r = grad_check_with_fault(kind, 0, DEFAULT_EPS).unwrap();
            assert!(r.max_relative_error > 1e-2);
            assert!(!r.passed());
        }
    }
}
