use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rank::spearman;
use super::ttest::one_sample_t_test;
use crate::error::{Error, Result};
use crate::neural::RegressorModel;
use crate::scalar::Real;
use crate::session::WindowPair;

/// Per-channel rank agreement between predicted and true envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_channel_scc: Vec<f64>,
    pub mean_scc: f64,
    pub best_channel_index: usize,
    pub best_channel_scc: f64,
    pub t_statistic: f64,
    pub p_value_one_sided: f64,
    pub n_trials: usize,
    pub n_windows: usize,
    /// Best-channel SCC of each trial, in trial id order.
    pub per_trial_scc: Vec<f64>,
}

/// SCC, with an undefined correlation (a constant side) counted as 0.
fn scc_or_zero(x: &[f64], y: &[f64]) -> Result<f64> {
    match spearman(x, y) {
        Ok(r) => Ok(r),
        Err(Error::UndefinedCorrelation) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Builds a report from per-window predictions and targets.
///
/// The t-test runs over per-trial SCCs of the best channel; trials with
/// fewer than three windows do not contribute. When fewer than two trials
/// remain, or their SCCs are identical, the report carries `t = 0, p = 1`.
pub fn evaluate_predictions(pred: &[Vec<f64>], truth: &[Vec<f64>], trial_ids: &[usize]) -> Result<EvalReport> {
    if pred.is_empty() {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    if pred.len() != truth.len() || pred.len() != trial_ids.len() {
        return Err(Error::InvalidArgument("prediction, target and trial counts differ".into()));
    }
    let n_ch = truth[0].len();
    if pred.iter().chain(truth).any(|v| v.len() != n_ch) {
        return Err(Error::Shape("ragged prediction or target vectors".into()));
    }
    let column = |rows: &[Vec<f64>], c: usize| -> Vec<f64> { rows.iter().map(|r| r[c]).collect() };
    let per_channel_scc: Vec<f64> =
        (0..n_ch).map(|c| scc_or_zero(&column(pred, c), &column(truth, c))).collect::<Result<_>>()?;
    let mean_scc = per_channel_scc.iter().sum::<f64>() / n_ch as f64;
    let best_channel_index = (0..n_ch).fold(0, |b, c| if per_channel_scc[c] > per_channel_scc[b] { c } else { b });
    let best_channel_scc = per_channel_scc[best_channel_index];

    let mut by_trial: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((p, t), &id) in pred.iter().zip(truth).zip(trial_ids) {
        let e = by_trial.entry(id).or_default();
        e.0.push(p[best_channel_index]);
        e.1.push(t[best_channel_index]);
    }
    let n_trials = by_trial.len();
    let per_trial_scc: Vec<f64> = by_trial
        .values()
        .filter(|(p, _)| p.len() >= 3)
        .map(|(p, t)| scc_or_zero(p, t))
        .collect::<Result<_>>()?;
    let (t_statistic, p_value_one_sided) = match one_sample_t_test(&per_trial_scc, 0.0) {
        Ok(t) => (t.t, t.p_one_sided),
        Err(Error::InsufficientData(_) | Error::DegenerateSample) => (0.0, 1.0),
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        per_channel_scc,
        mean_scc,
        best_channel_index,
        best_channel_scc,
        t_statistic,
        p_value_one_sided,
        n_trials,
        n_windows: pred.len(),
        per_trial_scc,
    })
}

/// Envelope predictions for `windows`, in order.
pub fn predict_windows<T: Real>(model: &RegressorModel<T>, windows: &[&WindowPair<T>]) -> Result<Vec<Vec<f64>>> {
    windows
        .par_iter()
        .map(|w| Ok(model.predict_envelope(&w.x)?.into_iter().map(|v| v.as_f64()).collect()))
        .collect()
}

/// Scores `model` on the given test windows.
pub fn evaluate_regressor<T: Real>(model: &RegressorModel<T>, windows: &[&WindowPair<T>]) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    let pred = predict_windows(model, windows)?;
    let truth: Vec<Vec<f64>> = windows.iter().map(|w| w.y.iter().map(|v| v.as_f64()).collect()).collect();
    let ids: Vec<usize> = windows.iter().map(|w| w.trial_id).collect();
    evaluate_predictions(&pred, &truth, &ids)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("report: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Fixed-layout table: one row per channel, then the summary rows.
    pub fn render_table(&self, channel_names: Option<&[String]>) -> String {
        let name = |c: usize| channel_names.and_then(|n| n.get(c).cloned()).unwrap_or_else(|| format!("ch{c}"));
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} {:>10}", "channel", "scc");
        let _ = writeln!(s, "{:-<18} {:->10}", "", "");
        for (c, r) in self.per_channel_scc.iter().enumerate() {
            let mark = if c == self.best_channel_index { " *" } else { "" };
            let _ = writeln!(s, "{:<18} {:>10.4}{mark}", name(c), r);
        }
        let _ = writeln!(s, "{:-<18} {:->10}", "", "");
        let _ = writeln!(s, "{:<18} {:>10.4}", "mean_scc", self.mean_scc);
        let _ = writeln!(s, "{:<18} {:>10.4}", "best_channel_scc", self.best_channel_scc);
        let _ = writeln!(s, "{:<18} {:>10}", "best_channel", name(self.best_channel_index));
        let _ = writeln!(s, "{:<18} {:>10.4}", "t_statistic", self.t_statistic);
        let _ = writeln!(s, "{:<18} {:>10.3e}", "p_one_sided", self.p_value_one_sided);
        let _ = writeln!(s, "{:<18} {:>10}", "n_trials", self.n_trials);
        let _ = writeln!(s, "{:<18} {:>10}", "n_windows", self.n_windows);
        s
    }
}
