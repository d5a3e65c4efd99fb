//! Multi-channel sample containers and multi-rate alignment.
//!
//! EEG (500 Hz), EMG (1000 Hz) and force (6.6 Hz) arrive at different
//! rates. [`align`] upsamples everything to [`ALIGNED_RATE_HZ`] with linear
//! interpolation and truncates to the shortest modality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Common rate every modality is brought to before processing.
pub const ALIGNED_RATE_HZ: f64 = 1000.0;

/// Uniformly sampled multi-channel series, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelSignal<T> {
    rate_hz: f64,
    channel_names: Vec<String>,
    data: Vec<Vec<T>>,
}

impl<T: Real> MultiChannelSignal<T> {
    pub fn new(rate_hz: f64, channel_names: Vec<String>, data: Vec<Vec<T>>) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("rate must be positive, got {rate_hz}")));
        }
        if data.is_empty() {
            return Err(Error::InvalidArgument("signal needs at least one channel".into()));
        }
        if channel_names.len() != data.len() {
            return Err(Error::InvalidArgument(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                data.len()
            )));
        }
        let n = data[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("signal needs at least one sample".into()));
        }
        if let Some((i, row)) = data.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "channel {i} has {} samples, expected {n}",
                row.len()
            )));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        Ok(Self { rate_hz, channel_names, data })
    }

    /// Builds a signal with generated channel names `{prefix}{index}`.
    pub fn from_rows(rate_hz: f64, prefix: &str, data: Vec<Vec<T>>) -> Result<Self> {
        let names = (0..data.len()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(rate_hz, names, data)
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data[0].len()
    }

    /// Time between the first and last sample, in seconds.
    pub fn duration_s(&self) -> f64 {
        (self.n_samples() - 1) as f64 / self.rate_hz
    }

    pub fn channel(&self, i: usize) -> &[T] {
        &self.data[i]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.data
    }

    pub fn into_rows(self) -> Vec<Vec<T>> {
        self.data
    }

    /// Same metadata, new sample rows. Used by filters that preserve shape.
    pub fn with_rows(&self, data: Vec<Vec<T>>) -> Result<Self> {
        Self::new(self.rate_hz, self.channel_names.clone(), data)
    }

    /// Samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_samples() {
            return Err(Error::InvalidInterval { start, end, len: self.n_samples() });
        }
        let data = self.data.iter().map(|r| r[start..end].to_vec()).collect();
        Ok(Self { rate_hz: self.rate_hz, channel_names: self.channel_names.clone(), data })
    }

    /// Converts every sample to another scalar type.
    pub fn cast<U: Real>(&self) -> MultiChannelSignal<U> {
        let data = self.data.iter().map(|r| r.iter().map(|v| U::lit(v.as_f64())).collect()).collect();
        MultiChannelSignal { rate_hz: self.rate_hz, channel_names: self.channel_names.clone(), data }
    }

    pub(crate) fn truncate(&mut self, n: usize) {
        for row in &mut self.data {
            row.truncate(n);
        }
    }
}

/// Number of output samples produced by [`resample`].
pub fn resampled_len(n_in: usize, source_hz: f64, target_hz: f64) -> usize {
    // The guard keeps exact ratios such as 4999 * 2 from flooring down.
    (((n_in - 1) as f64) * target_hz / source_hz + 1e-9).floor() as usize + 1
}

/// Linear-interpolation upsampling onto a uniform grid starting at the
/// first input sample.
pub fn resample<T: Real>(sig: &MultiChannelSignal<T>, target_rate_hz: f64) -> Result<MultiChannelSignal<T>> {
    if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("target rate must be positive, got {target_rate_hz}")));
    }
    let source = sig.rate_hz();
    if target_rate_hz < source {
        return Err(Error::UnsupportedDownsample { from_hz: source, to_hz: target_rate_hz });
    }
    if target_rate_hz == source {
        return Ok(sig.clone());
    }
    let n_in = sig.n_samples();
    let n_out = resampled_len(n_in, source, target_rate_hz);
    let step = source / target_rate_hz;
    let data = sig
        .rows()
        .iter()
        .map(|row| {
            (0..n_out)
                .map(|k| {
                    let pos = k as f64 * step;
                    let i = (pos.floor() as usize).min(n_in - 1);
                    let frac = pos - i as f64;
                    if i + 1 >= n_in || frac <= 0.0 {
                        row[i]
                    } else {
                        let f = T::lit(frac);
                        row[i] + (row[i + 1] - row[i]) * f
                    }
                })
                .collect()
        })
        .collect();
    MultiChannelSignal::new(target_rate_hz, sig.channel_names().to_vec(), data)
}

/// One labelled movement trial inside a recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovementLabel {
    pub trial_index: usize,
    pub label: String,
}

/// A recording as captured, every modality at its native rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSession<T> {
    pub subject_id: String,
    pub eeg: MultiChannelSignal<T>,
    pub emg: MultiChannelSignal<T>,
    pub force: MultiChannelSignal<T>,
    pub movement_labels: Vec<MovementLabel>,
}

impl<T: Real> RawSession<T> {
    /// Checks that all modalities span the same duration within one force
    /// sample period.
    pub fn validate(&self) -> Result<()> {
        let tol = 1.0 / self.force.rate_hz() + 1e-9;
        let d = [self.eeg.duration_s(), self.emg.duration_s(), self.force.duration_s()];
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > tol {
            return Err(Error::InvalidSession(format!(
                "modality durations {d:?} differ by more than {tol:.4} s"
            )));
        }
        Ok(())
    }
}

/// All modalities at [`ALIGNED_RATE_HZ`] with equal sample counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSession<T> {
    pub subject_id: String,
    pub eeg: MultiChannelSignal<T>,
    pub emg: MultiChannelSignal<T>,
    pub force: MultiChannelSignal<T>,
    pub movement_labels: Vec<MovementLabel>,
}

impl<T: Real> AlignedSession<T> {
    pub fn rate_hz(&self) -> f64 {
        self.eeg.rate_hz()
    }

    pub fn n_samples(&self) -> usize {
        self.eeg.n_samples()
    }

    /// Views the aligned session as a raw one (all modalities at 1000 Hz).
    pub fn into_raw(self) -> RawSession<T> {
        RawSession {
            subject_id: self.subject_id,
            eeg: self.eeg,
            emg: self.emg,
            force: self.force,
            movement_labels: self.movement_labels,
        }
    }
}

/// Upsamples every modality to 1000 Hz and truncates to the shortest.
pub fn align<T: Real>(raw: &RawSession<T>) -> Result<AlignedSession<T>> {
    raw.validate()?;
    let eeg = resample(&raw.eeg, ALIGNED_RATE_HZ).map_err(session_err("eeg"))?;
    let emg = resample(&raw.emg, ALIGNED_RATE_HZ).map_err(session_err("emg"))?;
    let force = resample(&raw.force, ALIGNED_RATE_HZ).map_err(session_err("force"))?;
    let n = eeg.n_samples().min(emg.n_samples()).min(force.n_samples());
    let (mut eeg, mut emg, mut force) = (eeg, emg, force);
    eeg.truncate(n);
    emg.truncate(n);
    force.truncate(n);
    Ok(AlignedSession {
        subject_id: raw.subject_id.clone(),
        eeg,
        emg,
        force,
        movement_labels: raw.movement_labels.clone(),
    })
}

fn session_err(modality: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::InvalidSession(format!("{modality}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(rate: f64, rows: Vec<Vec<f64>>) -> MultiChannelSignal<f64> {
        MultiChannelSignal::from_rows(rate, "ch", rows).unwrap()
    }

    #[test]
    fn constant_upsample() {
        let out = resample(&sig(2.0, vec![vec![5.0; 3]]), 4.0).unwrap();
        assert_eq!(out.channel(0), &[5.0; 5]);
    }

    #[test]
    fn ramp_upsample_is_exact() {
        let out = resample(&sig(1.0, vec![vec![0.0, 1.0]]), 2.0).unwrap();
        assert_eq!(out.channel(0), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn force_rate_length() {
        let out = resample(&sig(6.6, vec![vec![1.0; 66]]), 1000.0).unwrap();
        assert_eq!(out.n_samples(), 9849);
        assert_eq!(resampled_len(5000, 500.0, 1000.0), 9999);
    }

    #[test]
    fn identity_is_bit_equal() {
        let s = sig(1000.0, vec![vec![0.1, -0.3, 1e-7]]);
        assert_eq!(resample(&s, 1000.0).unwrap(), s);
    }

    #[test]
    fn rejects_downsample_and_bad_rate() {
        let s = sig(1000.0, vec![vec![0.0; 4]]);
        assert!(matches!(resample(&s, 500.0), Err(Error::UnsupportedDownsample { .. })));
        assert!(matches!(resample(&s, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(resample(&s, -3.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn signal_invariants() {
        assert!(MultiChannelSignal::<f64>::from_rows(10.0, "c", vec![]).is_err());
        assert!(MultiChannelSignal::<f64>::from_rows(10.0, "c", vec![vec![]]).is_err());
        assert!(MultiChannelSignal::from_rows(10.0, "c", vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(MultiChannelSignal::from_rows(10.0, "c", vec![vec![f64::NAN]]).is_err());
        assert!(MultiChannelSignal::new(10.0, vec!["a".into()], vec![vec![1.0], vec![2.0]]).is_err());
    }

    fn ten_second_session(force_val: f64) -> RawSession<f64> {
        RawSession {
            subject_id: "s".into(),
            eeg: sig(500.0, vec![vec![1.0; 5000]; 2]),
            emg: sig(1000.0, vec![vec![2.0; 10000]]),
            force: sig(6.6, vec![vec![force_val; 66]]),
            movement_labels: vec![MovementLabel { trial_index: 0, label: "flex".into() }],
        }
    }

    #[test]
    fn align_truncates_to_shortest() {
        let raw = ten_second_session(0.0);
        let a = align(&raw).unwrap();
        assert_eq!(a.eeg.n_samples(), 9849);
        assert_eq!(a.emg.n_samples(), 9849);
        assert_eq!(a.force.n_samples(), 9849);
        assert!(a.force.channel(0).iter().all(|&v| v == 0.0));
        assert_eq!(a.movement_labels, raw.movement_labels);
    }

    #[test]
    fn eeg_doubling() {
        let s = sig(500.0, vec![vec![0.0; 5000]]);
        // 10 s at 500 Hz: samples 0..=4999 cover 9.998 s.
        assert_eq!(resample(&s, 1000.0).unwrap().n_samples(), 9999);
    }

    #[test]
    fn align_is_idempotent() {
        let raw = ten_second_session(3.0);
        let a = align(&raw).unwrap();
        let b = align(&a.clone().into_raw()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn align_rejects_mismatched_durations() {
        let mut raw = ten_second_session(0.0);
        raw.emg = sig(1000.0, vec![vec![0.0; 5000]]);
        assert!(matches!(align(&raw), Err(Error::InvalidSession(_))));
    }
}
