//! Causal EEG front end shared by the live pipeline and offline decoding.

use std::collections::VecDeque;

use bmui_core::dsp::EegStream;
use bmui_core::signal::ALIGNED_RATE_HZ;
use bmui_core::{Error, Regressor, Result};

/// Streaming linear interpolation by an integer factor. Matches the batch
/// resampler sample for sample, one source sample behind.
#[derive(Debug, Clone)]
pub struct Upsampler {
    factor: usize,
    last: Vec<Option<f64>>,
}

impl Upsampler {
    pub fn new(n_channels: usize, source_hz: f64, target_hz: f64) -> Result<Self> {
        let ratio = target_hz / source_hz;
        let factor = ratio.round() as usize;
        if factor == 0 || (ratio - factor as f64).abs() > 1e-9 {
            return Err(Error::Unsupported(format!("streaming resample from {source_hz} Hz to {target_hz} Hz")));
        }
        Ok(Self { factor, last: vec![None; n_channels] })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn process(&mut self, chunk: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if chunk.len() != self.last.len() {
            return Err(Error::Shape(format!("expected {} channels, got {}", self.last.len(), chunk.len())));
        }
        let l = self.factor as f64;
        Ok(chunk
            .iter()
            .zip(&mut self.last)
            .map(|(row, last)| {
                let mut out = Vec::with_capacity(row.len() * self.factor);
                for &x in row {
                    match *last {
                        None => out.push(x),
                        Some(p) => out.extend((1..=self.factor).map(|j| p + (x - p) * (j as f64 / l))),
                    }
                    *last = Some(x);
                }
                out
            })
            .collect())
    }

    pub fn reset(&mut self) {
        self.last.iter_mut().for_each(|v| *v = None);
    }
}

/// Upsampling to 1000 Hz followed by causal CAR and band-pass.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    upsampler: Upsampler,
    eeg: EegStream<f64>,
}

impl FrontEnd {
    pub fn new(n_channels: usize, source_hz: f64) -> Result<Self> {
        Ok(Self {
            upsampler: Upsampler::new(n_channels, source_hz, ALIGNED_RATE_HZ)?,
            eeg: EegStream::new(n_channels, ALIGNED_RATE_HZ)?,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.eeg.n_channels()
    }

    pub fn process(&mut self, chunk: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut up = self.upsampler.process(chunk)?;
        self.eeg.process(&mut up)?;
        Ok(up)
    }

    pub fn reset(&mut self) {
        self.upsampler.reset();
        self.eeg.reset();
    }
}

/// The most recent `len` samples of every channel.
#[derive(Debug, Clone)]
pub struct WindowRing {
    len: usize,
    rows: Vec<VecDeque<f64>>,
}

impl WindowRing {
    pub fn new(n_channels: usize, len: usize) -> Self {
        Self { len, rows: vec![VecDeque::with_capacity(len); n_channels] }
    }

    pub fn push(&mut self, chunk: &[Vec<f64>]) {
        for (ring, row) in self.rows.iter_mut().zip(chunk) {
            for &v in row {
                if ring.len() == self.len {
                    ring.pop_front();
                }
                ring.push_back(v);
            }
        }
    }

    pub fn is_full(&self) -> bool {
        self.rows.iter().all(|r| r.len() == self.len)
    }

    pub fn window(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn clear(&mut self) {
        self.rows.iter_mut().for_each(VecDeque::clear);
    }
}

/// Envelope predictions at each chunk boundary for an EEG recording fed
/// through the live front end in `chunk` source samples at a time. Entries
/// are `None` until the window ring first fills.
pub fn decode_chunks(
    eeg: &bmui_core::Signal,
    regressor: &Regressor,
    chunk: usize,
) -> Result<Vec<Option<Vec<f64>>>> {
    if eeg.n_channels() != regressor.config().n_eeg_ch {
        return Err(Error::Shape(format!(
            "model expects {} EEG channels, recording has {}",
            regressor.config().n_eeg_ch,
            eeg.n_channels()
        )));
    }
    let mut fe = FrontEnd::new(eeg.n_channels(), eeg.rate_hz())?;
    let mut ring = WindowRing::new(eeg.n_channels(), regressor.config().window);
    let mut out = Vec::new();
    let n = eeg.n_samples();
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let part: Vec<Vec<f64>> = eeg.rows().iter().map(|r| r[start..end].to_vec()).collect();
        ring.push(&fe.process(&part)?);
        out.push(if ring.is_full() { Some(regressor.predict_envelope(&ring.window())?) } else { None });
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bmui_core::dsp::{car, design_butterworth, filter_causal, FilterDesign, EEG_BAND_HZ, FILTER_ORDER};
    use bmui_core::signal::{resample, MultiChannelSignal};

    fn noise(n_ch: usize, n: usize) -> Vec<Vec<f64>> {
        (0..n_ch).map(|c| (0..n).map(|i| ((i * 7919 + c * 104729) % 1000) as f64 / 500.0 - 1.0).collect()).collect()
    }

    #[test]
    fn upsampler_matches_batch_resample() {
        let rows = noise(3, 101);
        let sig = MultiChannelSignal::from_rows(500.0, "ch", rows.clone()).unwrap();
        let batch = resample(&sig, 1000.0).unwrap();
        let mut up = Upsampler::new(3, 500.0, 1000.0).unwrap();
        let mut streamed = vec![Vec::new(); 3];
        for w in [0, 1, 25, 26, 60, 101].windows(2) {
            let part: Vec<Vec<f64>> = rows.iter().map(|r| r[w[0]..w[1]].to_vec()).collect();
            for (acc, p) in streamed.iter_mut().zip(up.process(&part).unwrap()) {
                acc.extend(p);
            }
        }
        for (s, b) in streamed.iter().zip(batch.rows()) {
            assert_eq!(s.len(), b.len());
            assert!(s.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn front_end_matches_offline_causal_chain() {
        let rows = noise(4, 1000);
        let sig = MultiChannelSignal::from_rows(500.0, "ch", rows.clone()).unwrap();
        let bp = design_butterworth::<f64>(&FilterDesign::bandpass(FILTER_ORDER, EEG_BAND_HZ.0, EEG_BAND_HZ.1, 1000.0))
            .unwrap();
        let offline = filter_causal(&bp, &car(&resample(&sig, 1000.0).unwrap())).unwrap();
        let mut fe = FrontEnd::new(4, 500.0).unwrap();
        let mut live = vec![Vec::new(); 4];
        for k in (0..1000).step_by(25) {
            let part: Vec<Vec<f64>> = rows.iter().map(|r| r[k..k + 25].to_vec()).collect();
            for (acc, p) in live.iter_mut().zip(fe.process(&part).unwrap()) {
                acc.extend(p);
            }
        }
        for (l, o) in live.iter().zip(offline.rows()) {
            assert!(l.iter().zip(o).all(|(x, y)| (x - y).abs() < 1e-9));
        }
    }

    #[test]
    fn ring_keeps_latest_samples() {
        let mut r = WindowRing::new(1, 4);
        r.push(&[vec![1.0, 2.0, 3.0]]);
        assert!(!r.is_full());
        r.push(&[vec![4.0, 5.0]]);
        assert_eq!(r.window(), vec![vec![2.0, 3.0, 4.0, 5.0]]);
        r.clear();
        assert!(!r.is_full());
    }

    #[test]
    fn rejects_fractional_factor() {
        assert!(Upsampler::new(1, 300.0, 1000.0).is_err());
    }
}
