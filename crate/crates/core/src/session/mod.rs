//! Session storage, synthetic sessions, segmentation and windowing.

mod io;
mod segment;
mod synth;
mod window;

pub use io::{
    fmt9, load_session, load_session_dir, read_manifest, save_session, save_session_dir, ModalityDescriptor,
    SessionManifest, SessionStage, StoredSession, GROUND_TRUTH_FILE, MANIFEST_FILE, SESSION_FORMAT,
};
pub use segment::{detect_active_periods, segment_session, ActiveInterval, SegmentPolicy, Trial};
pub use synth::{
    synthesize_envelope_sequences, synthesize_scripted, synthesize_session, GroundTruth, IntentShaper, ScriptStep,
    SynthChunk, SynthConfig, SynthGenerator, SynthSession, DEFAULT_EMG_GAINS, EEG_RATE_HZ, EMG_RATE_HZ,
    FORCE_RATE_HZ, HIGH_EFFORT, LOW_EFFORT, RAMP_S,
};
pub use window::{make_windows, ms_to_samples, window_count, WindowPair, DEFAULT_STRIDE_MS, DEFAULT_WINDOW_MS};

use crate::dsp::{emg_envelope, preprocess_eeg, preprocess_emg};
use crate::error::Result;
use crate::scalar::Real;
use crate::signal::{align, AlignedSession, RawSession};

/// Aligns a raw session to 1000 Hz, then filters EEG and replaces EMG by
/// its envelope. Force is carried unchanged.
pub fn preprocess_session<T: Real>(raw: &RawSession<T>) -> Result<AlignedSession<T>> {
    raw.validate()?;
    let mut aligned = align(raw)?;
    aligned.eeg = preprocess_eeg(&aligned.eeg)?;
    aligned.emg = emg_envelope(&preprocess_emg(&aligned.emg)?)?;
    Ok(aligned)
}

/// Preprocessed session cut into trials and windows.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub session: AlignedSession<T>,
    pub intervals: Vec<ActiveInterval>,
    pub trials: Vec<Trial<T>>,
    pub windows: Vec<WindowPair<T>>,
    pub skipped_trials: usize,
}

/// Window geometry and segmentation policy for [`build_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub window_ms: f64,
    pub stride_ms: f64,
    pub policy: SegmentPolicy,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self { window_ms: DEFAULT_WINDOW_MS, stride_ms: DEFAULT_STRIDE_MS, policy: SegmentPolicy::default() }
    }
}

/// Preprocesses (unless already done), detects active periods on force,
/// segments and windows.
pub fn build_dataset<T: Real>(stored: &StoredSession<T>, spec: &DatasetSpec) -> Result<Dataset<T>> {
    let session = match stored.stage {
        SessionStage::Raw => preprocess_session(&stored.session)?,
        SessionStage::Preprocessed => align(&stored.session)?,
    };
    let rate = session.rate_hz();
    let intervals = detect_active_periods(&session.force, &spec.policy)?;
    let trials = segment_session(&session, &intervals)?;
    let (windows, skipped_trials) =
        make_windows(&trials, ms_to_samples(spec.window_ms, rate), ms_to_samples(spec.stride_ms, rate));
    Ok(Dataset { session, intervals, trials, windows, skipped_trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detected_periods_match_ground_truth() {
        let cfg = SynthConfig { seed: 5, n_trials: 8, ..SynthConfig::default() };
        let s = synthesize_session(&cfg).unwrap();
        let stored = StoredSession { session: s.session.clone(), stage: SessionStage::Raw, ground_truth: None };
        let ds = build_dataset(&stored, &DatasetSpec::default()).unwrap();
        assert_eq!(ds.intervals.len(), s.intervals.len());
        for (d, t) in ds.intervals.iter().zip(&s.intervals) {
            assert!(d.iou(t) >= 0.8, "{d:?} vs {t:?}");
        }
        assert_eq!(ds.trials.len(), 8);
        for (tr, iv) in ds.trials.iter().zip(&s.intervals) {
            assert_eq!(Some(&tr.label), iv.label.as_ref());
        }
        assert_eq!(ds.skipped_trials, 0);
        let per_trial: usize = ds.trials.iter().map(|t| window_count(t.data.n_samples(), 200, 50)).sum();
        assert_eq!(ds.windows.len(), per_trial);
    }
}
