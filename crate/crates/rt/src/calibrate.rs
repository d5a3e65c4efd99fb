//! Fitting the direction classifier and the magnitude calibration on
//! envelopes decoded the way the live pipeline decodes them.

use bmui_core::control::{calibrate, percentile, Calibration, Direction, EFFORT_PERCENTILE, HISTORY_STEPS, REST_PERCENTILE};
use bmui_core::metrics::evaluate_regressor;
use bmui_core::neural::{classifier_accuracy, split_trials, train_classifier, ClassifierConfig, TrainConfig, TrainHistory};
use bmui_core::session::{build_dataset, ActiveInterval, Dataset, DatasetSpec, GroundTruth, StoredSession, WindowPair, HIGH_EFFORT};
use bmui_core::{Classifier, Error, Regressor, Result};

use crate::frontend::decode_chunks;

/// Live-path envelope predictions, one per control step.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub envelopes: Vec<Option<Vec<f64>>>,
    /// 1000 Hz sample index of each step's last sample.
    pub step_end: Vec<usize>,
}

pub fn decode_session(stored: &StoredSession<f64>, regressor: &Regressor, chunk_ms: u32) -> Result<StepTrace> {
    let eeg = &stored.session.eeg;
    let chunk = (chunk_ms as f64 * eeg.rate_hz() / 1000.0).round() as usize;
    let factor = (1000.0 / eeg.rate_hz()).round() as usize;
    let envelopes = decode_chunks(eeg, regressor, chunk)?;
    let n = eeg.n_samples();
    let step_end = (0..envelopes.len()).map(|k| (((k + 1) * chunk).min(n) - 1) * factor).collect();
    Ok(StepTrace { envelopes, step_end })
}

/// Direction and whether the step is at maximal effort, per step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLabels {
    pub direction: Vec<Direction>,
    pub max_effort: Vec<bool>,
}

/// Labels from the latent intent when the session carries it.
pub fn labels_from_truth(truth: &GroundTruth, step_end: &[usize]) -> StepLabels {
    let last = truth.len().saturating_sub(1);
    let direction = step_end.iter().map(|&t| truth.direction_at(t.min(last))).collect();
    let max_effort = step_end
        .iter()
        .map(|&t| truth.u_flex[t.min(last)].max(truth.u_extend[t.min(last)]) >= HIGH_EFFORT - 1e-9)
        .collect();
    StepLabels { direction, max_effort }
}

/// Labels from the detected, labelled active periods. Every active step
/// counts as effort unless some labels name a `high` level.
pub fn labels_from_intervals(intervals: &[ActiveInterval], step_end: &[usize]) -> StepLabels {
    let any_high = intervals.iter().any(|iv| iv.label.as_deref().is_some_and(|l| l.contains("high")));
    let find = |t: usize| intervals.iter().find(|iv| iv.start <= t && t < iv.end);
    let direction = step_end
        .iter()
        .map(|&t| find(t).and_then(|iv| iv.label.as_deref().and_then(Direction::from_label)).unwrap_or(Direction::Rest))
        .collect();
    let max_effort = step_end
        .iter()
        .map(|&t| match find(t) {
            Some(iv) => !any_high || iv.label.as_deref().is_some_and(|l| l.contains("high")),
            None => false,
        })
        .collect();
    StepLabels { direction, max_effort }
}

/// Histories of `HISTORY_STEPS` envelopes labelled by the direction at their last step.
pub fn direction_sequences(trace: &StepTrace, labels: &StepLabels) -> Vec<(Vec<Vec<f64>>, usize)> {
    let mut out = Vec::new();
    for k in HISTORY_STEPS - 1..trace.envelopes.len() {
        let window = &trace.envelopes[k + 1 - HISTORY_STEPS..=k];
        if window.iter().any(Option::is_none) {
            continue;
        }
        let n_ch = window[0].as_ref().map_or(0, Vec::len);
        let seq = (0..n_ch).map(|c| window.iter().map(|e| e.as_ref().map_or(0.0, |v| v[c])).collect()).collect();
        out.push((seq, labels.direction[k].index()));
    }
    out
}

/// Per-channel SCC of `regressor` on the validation trials of the split
/// used for training.
pub fn validation_scc(dataset: &Dataset<f64>, regressor: &Regressor, train: &TrainConfig) -> Result<Vec<f64>> {
    let ids: Vec<usize> = dataset.windows.iter().map(|w| w.trial_id).collect();
    let split = split_trials(&ids, train.split, train.seed)?;
    let pool = if split.val.is_empty() { &split.train } else { &split.val };
    let val: Vec<&WindowPair<f64>> = dataset.windows.iter().filter(|w| pool.contains(&w.trial_id)).collect();
    Ok(evaluate_regressor(regressor, &val)?.per_channel_scc)
}

/// Fraction of the calibrated range a channel's median max-effort envelope
/// must reach in each direction to be eligible as the magnitude source.
pub const RELEVANCE_MIN: f64 = 0.5;

/// Channels whose envelope rises clearly above rest in both flexion and
/// extension, so that one calibrated range can drive either direction.
/// Inputs are `[channel][sample]`.
pub fn bidirectional_channels(
    rest: &[Vec<f64>],
    effort: &[Vec<f64>],
    flex_effort: &[Vec<f64>],
    extend_effort: &[Vec<f64>],
) -> Vec<bool> {
    (0..rest.len())
        .map(|c| {
            let (Ok(low), Ok(high)) = (percentile(&rest[c], REST_PERCENTILE), percentile(&effort[c], EFFORT_PERCENTILE)) else {
                return false;
            };
            high > low
                && [flex_effort, extend_effort].iter().all(|seg| {
                    percentile(&seg[c], 50.0).is_ok_and(|median| (median - low) / (high - low) >= RELEVANCE_MIN)
                })
        })
        .collect()
}

/// Result of [`fit_direction_stage`].
#[derive(Debug, Clone)]
pub struct DirectionFit {
    pub classifier: Classifier,
    pub calibration: Calibration,
    pub history: TrainHistory,
    pub test_accuracy: f64,
    pub n_sequences: usize,
    pub channel_scc: Vec<f64>,
    /// Channels eligible as the magnitude source, see [`bidirectional_channels`].
    pub bidirectional: Vec<bool>,
}

/// Trains the classifier on live-path envelope histories of `stored` and
/// calibrates the best validation channel among those active in both
/// directions (all channels when none is).
pub fn fit_direction_stage(
    stored: &StoredSession<f64>,
    regressor: &Regressor,
    regressor_split: &TrainConfig,
    classifier_train: &TrainConfig,
    chunk_ms: u32,
) -> Result<DirectionFit> {
    let dataset = build_dataset(stored, &DatasetSpec::default())?;
    let channel_scc = validation_scc(&dataset, regressor, regressor_split)?;
    let trace = decode_session(stored, regressor, chunk_ms)?;
    let labels = match &stored.ground_truth {
        Some(gt) => labels_from_truth(gt, &trace.step_end),
        None => labels_from_intervals(&dataset.intervals, &trace.step_end),
    };
    let sequences = direction_sequences(&trace, &labels);
    let n_ch = regressor.config().n_emg_ch;
    let fit = train_classifier(&sequences, ClassifierConfig::standard(n_ch), classifier_train)?;
    let test_accuracy = classifier_accuracy(&fit.model, &sequences, &fit.test)?;

    let pick = |keep: &dyn Fn(usize) -> bool| -> Vec<Vec<f64>> {
        let rows: Vec<&Vec<f64>> =
            (0..trace.envelopes.len()).filter(|&k| keep(k)).filter_map(|k| trace.envelopes[k].as_ref()).collect();
        (0..n_ch).map(|c| rows.iter().map(|r| r[c]).collect()).collect()
    };
    let rest = pick(&|k| labels.direction[k] == Direction::Rest);
    let effort = pick(&|k| labels.max_effort[k]);
    let flex = pick(&|k| labels.max_effort[k] && labels.direction[k] == Direction::Flex);
    let extend = pick(&|k| labels.max_effort[k] && labels.direction[k] == Direction::Extend);
    let bidirectional = bidirectional_channels(&rest, &effort, &flex, &extend);
    let eligible_scc: Vec<f64> = if bidirectional.contains(&true) {
        channel_scc.iter().zip(&bidirectional).map(|(&s, &ok)| if ok { s } else { f64::NEG_INFINITY }).collect()
    } else {
        channel_scc.clone()
    };
    let rate = 1000.0 / chunk_ms as f64;
    let calibration = calibrate(&rest, &effort, &eligible_scc, rate)
        .map_err(|e| match e {
            Error::InsufficientData(m) => Error::InsufficientData(format!("calibration: {m}")),
            other => other,
        })?;
    Ok(DirectionFit {
        classifier: fit.model,
        calibration,
        history: fit.history,
        test_accuracy,
        n_sequences: sequences.len(),
        channel_scc,
        bidirectional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bidirectional_needs_both_directions() {
        let rest = vec![vec![0.0; 20], vec![0.0; 20]];
        let flex = vec![vec![1.0; 20], vec![1.0; 20]];
        let extend = vec![vec![0.8; 20], vec![0.1; 20]];
        let effort: Vec<Vec<f64>> = (0..2).map(|c| [flex[c].clone(), extend[c].clone()].concat()).collect();
        assert_eq!(bidirectional_channels(&rest, &effort, &flex, &extend), vec![true, false]);
        assert_eq!(bidirectional_channels(&rest, &effort, &flex, &[vec![], vec![]]), vec![false, false]);
    }

    #[test]
    fn interval_labels() {
        let ivs = vec![
            ActiveInterval { start: 10, end: 20, label: Some("flex-high".into()) },
            ActiveInterval { start: 30, end: 40, label: Some("extend-low".into()) },
        ];
        let l = labels_from_intervals(&ivs, &[5, 10, 19, 20, 35]);
        use Direction::*;
        assert_eq!(l.direction, vec![Rest, Flex, Flex, Rest, Extend]);
        assert_eq!(l.max_effort, vec![false, true, true, false, false]);
    }

    #[test]
    fn sequences_skip_warm_up() {
        let mut envelopes = vec![None; 3];
        envelopes.extend((0..12).map(|k| Some(vec![k as f64, -(k as f64)])));
        let trace = StepTrace { envelopes, step_end: (0..15).collect() };
        let labels = StepLabels { direction: vec![Direction::Flex; 15], max_effort: vec![false; 15] };
        let seqs = direction_sequences(&trace, &labels);
        assert_eq!(seqs.len(), 3);
        assert_eq!(seqs[0].0[0], (0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(seqs[2].0[1][9], -11.0);
        assert_eq!(seqs[0].1, 0);
    }
}
