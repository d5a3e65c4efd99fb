use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const REST_PERCENTILE: f64 = 95.0;
pub const EFFORT_PERCENTILE: f64 = 90.0;

/// Envelope range of the channel that drives the magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub channel_index: usize,
    pub env_min: f64,
    pub env_max: f64,
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("percentile of an empty sample".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("percentile {q} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Picks the best-SCC channel and its rest / effort envelope levels.
///
/// `rest` and `effort` are `[n_ch][n_samples]` envelopes sampled at
/// `rate_hz`; each must cover at least one second.
pub fn calibrate<T: Real>(rest: &[Vec<T>], effort: &[Vec<T>], scc_per_channel: &[f64], rate_hz: f64) -> Result<Calibration> {
    let n_ch = scc_per_channel.len();
    if n_ch == 0 || rest.len() != n_ch || effort.len() != n_ch {
        return Err(Error::Shape(format!(
            "{} SCC values for {} rest and {} effort channels",
            n_ch,
            rest.len(),
            effort.len()
        )));
    }
    let need = rate_hz.ceil() as usize;
    for (name, seg) in [("rest", rest), ("effort", effort)] {
        let have = seg.iter().map(Vec::len).min().unwrap_or(0);
        if have < need {
            return Err(Error::InsufficientData(format!("{name} segment has {have} samples, need {need}")));
        }
    }
    let channel_index = (0..n_ch).fold(0, |b, c| if scc_per_channel[c] > scc_per_channel[b] { c } else { b });
    let as_f64 = |row: &[T]| row.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
    let env_min = percentile(&as_f64(&rest[channel_index]), REST_PERCENTILE)?.max(0.0);
    let env_max = percentile(&as_f64(&effort[channel_index]), EFFORT_PERCENTILE)?;
    if !(env_max > env_min) {
        return Err(Error::CalibrationFailed(format!(
            "channel {channel_index}: effort level {env_max:.4e} does not exceed rest level {env_min:.4e}"
        )));
    }
    Ok(Calibration { channel_index, env_min, env_max })
}

/// Maps an envelope value linearly onto `[0, 1]`.
pub fn proportional_map(env_value: f64, calib: &Calibration) -> f64 {
    ((env_value - calib.env_min) / (calib.env_max - calib.env_min)).clamp(0.0, 1.0)
}

impl Calibration {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("calibration: {e}")))?;
        if !(c.env_max > c.env_min && c.env_min >= 0.0) {
            return Err(Error::CalibrationFailed(format!("stored range [{}, {}] is empty", c.env_min, c.env_max)));
        }
        Ok(c)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }
}
