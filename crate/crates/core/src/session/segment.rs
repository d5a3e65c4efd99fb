//! Force-threshold detection of active task periods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{AlignedSession, MultiChannelSignal};

/// Samples `[start, end)` at the aligned rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveInterval {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub label: Option<String>,
}

impl ActiveInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Intersection over union of two sample ranges.
    pub fn iou(&self, other: &ActiveInterval) -> f64 {
        let inter = self.end.min(other.end).saturating_sub(self.start.max(other.start));
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPolicy {
    /// Entry threshold as a fraction of the session's peak summed force.
    pub fraction: f64,
    /// Exit threshold as a fraction of the entry threshold.
    pub hysteresis: f64,
    pub min_duration_ms: f64,
}

impl Default for SegmentPolicy {
    fn default() -> Self {
        Self { fraction: 0.2, hysteresis: 0.5, min_duration_ms: 300.0 }
    }
}

impl SegmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.fraction)
            && self.fraction > 0.0
            && (0.0..=1.0).contains(&self.hysteresis)
            && self.min_duration_ms >= 0.0
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad segmentation policy {self:?}")))
        }
    }
}

/// Intervals where the summed force magnitude crosses the threshold.
pub fn detect_active_periods<T: Real>(force: &MultiChannelSignal<T>, policy: &SegmentPolicy) -> Result<Vec<ActiveInterval>> {
    policy.validate()?;
    let n = force.n_samples();
    let total: Vec<f64> = (0..n).map(|t| force.rows().iter().map(|r| r[t].as_f64().abs()).sum()).collect();
    let peak = total.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(Vec::new());
    }
    let enter = policy.fraction * peak;
    let exit = policy.hysteresis * enter;
    let min_len = (policy.min_duration_ms * force.rate_hz() / 1000.0).ceil() as usize;

    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (t, &v) in total.iter().enumerate() {
        match start {
            None if v >= enter => start = Some(t),
            Some(s) if v < exit => {
                if t - s >= min_len.max(1) {
                    out.push(ActiveInterval { start: s, end: t, label: None });
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if n - s >= min_len.max(1) {
            out.push(ActiveInterval { start: s, end: n, label: None });
        }
    }
    Ok(out)
}

/// One active period cut from an aligned session.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub id: usize,
    pub label: String,
    /// First sample in the source session.
    pub start: usize,
    pub data: AlignedSession<T>,
}

/// Slices every modality at each interval. The k-th interval takes the k-th
/// movement label, falling back to its own label.
pub fn segment_session<T: Real>(aligned: &AlignedSession<T>, intervals: &[ActiveInterval]) -> Result<Vec<Trial<T>>> {
    let n = aligned.n_samples();
    intervals
        .iter()
        .enumerate()
        .map(|(k, iv)| {
            if iv.start >= iv.end || iv.end > n {
                return Err(Error::InvalidInterval { start: iv.start, end: iv.end, len: n });
            }
            let label = aligned
                .movement_labels
                .get(k)
                .map(|l| l.label.clone())
                .or_else(|| iv.label.clone())
                .unwrap_or_else(|| "unlabelled".into());
            let data = AlignedSession {
                subject_id: aligned.subject_id.clone(),
                eeg: aligned.eeg.slice(iv.start, iv.end)?,
                emg: aligned.emg.slice(iv.start, iv.end)?,
                force: aligned.force.slice(iv.start, iv.end)?,
                movement_labels: aligned.movement_labels.get(k).cloned().into_iter().collect(),
            };
            Ok(Trial { id: k, label, start: iv.start, data })
        })
        .collect()
}
