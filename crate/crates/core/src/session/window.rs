use serde::{Deserialize, Serialize};

use super::segment::Trial;
use crate::scalar::Real;

pub const DEFAULT_WINDOW_MS: f64 = 200.0;
pub const DEFAULT_STRIDE_MS: f64 = 50.0;

/// One supervised example: an EEG window and the envelope at its last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPair<T> {
    /// `[n_eeg_ch × W]`
    pub x: Vec<Vec<T>>,
    /// `[n_emg_ch]`
    pub y: Vec<T>,
    pub trial_label: String,
    pub trial_id: usize,
    /// Session sample index of the window's last sample.
    pub t_end: usize,
}

pub fn ms_to_samples(ms: f64, rate_hz: f64) -> usize {
    (ms * rate_hz / 1000.0).round() as usize
}

/// Number of windows a trial of `len` samples yields.
pub fn window_count(len: usize, window: usize, stride: usize) -> usize {
    if len < window || window == 0 || stride == 0 {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// Slides a `window`-sample frame with step `stride` over each preprocessed
/// trial. Returns the windows and the number of trials too short for one.
pub fn make_windows<T: Real>(trials: &[Trial<T>], window: usize, stride: usize) -> (Vec<WindowPair<T>>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    for trial in trials {
        let count = window_count(trial.data.n_samples(), window, stride);
        if count == 0 {
            skipped += 1;
            continue;
        }
        for k in 0..count {
            let s = k * stride;
            let last = s + window - 1;
            out.push(WindowPair {
                x: trial.data.eeg.rows().iter().map(|r| r[s..s + window].to_vec()).collect(),
                y: trial.data.emg.rows().iter().map(|r| r[last]).collect(),
                trial_label: trial.label.clone(),
                trial_id: trial.id,
                t_end: trial.start + last,
            });
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} trial(s) shorter than the {window}-sample window were skipped");
    }
    (out, skipped)
}
