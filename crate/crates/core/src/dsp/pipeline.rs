use std::sync::Arc;

use super::biquad::{filter_zero_phase, BiquadCascade, StreamingFilterState};
use super::design::{design_butterworth, FilterDesign};
use super::{car, car_in_place};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{MultiChannelSignal, ALIGNED_RATE_HZ};

pub const FILTER_ORDER: usize = 4;
pub const EEG_BAND_HZ: (f64, f64) = (15.0, 35.0);
pub const EMG_BAND_HZ: (f64, f64) = (20.0, 450.0);
pub const NOTCH_BAND_HZ: (f64, f64) = (48.0, 52.0);
pub const ENVELOPE_CUTOFF_HZ: f64 = 10.0;

fn eeg_bandpass<T: Real>(rate_hz: f64) -> Result<BiquadCascade<T>> {
    design_butterworth(&FilterDesign::bandpass(FILTER_ORDER, EEG_BAND_HZ.0, EEG_BAND_HZ.1, rate_hz))
}

fn emg_bandpass<T: Real>(rate_hz: f64) -> Result<BiquadCascade<T>> {
    design_butterworth(&FilterDesign::bandpass(FILTER_ORDER, EMG_BAND_HZ.0, EMG_BAND_HZ.1, rate_hz))
}

fn notch<T: Real>(rate_hz: f64) -> Result<BiquadCascade<T>> {
    design_butterworth(&FilterDesign::bandstop(FILTER_ORDER, NOTCH_BAND_HZ.0, NOTCH_BAND_HZ.1, rate_hz))
}

fn envelope_lowpass<T: Real>(rate_hz: f64) -> Result<BiquadCascade<T>> {
    design_butterworth(&FilterDesign::lowpass(FILTER_ORDER, ENVELOPE_CUTOFF_HZ, rate_hz))
}

/// CAR followed by the 15–35 Hz band-pass, zero-phase.
pub fn preprocess_eeg<T: Real>(sig: &MultiChannelSignal<T>) -> Result<MultiChannelSignal<T>> {
    let bp = eeg_bandpass(sig.rate_hz())?;
    filter_zero_phase(&bp, &car(sig))
}

/// 20–450 Hz band-pass then 48–52 Hz band-stop, zero-phase. Requires 1000 Hz.
pub fn preprocess_emg<T: Real>(sig: &MultiChannelSignal<T>) -> Result<MultiChannelSignal<T>> {
    if sig.rate_hz() != ALIGNED_RATE_HZ {
        return Err(Error::InvalidRate { expected: ALIGNED_RATE_HZ, actual: sig.rate_hz() });
    }
    let bp = emg_bandpass(sig.rate_hz())?;
    let bs = notch(sig.rate_hz())?;
    filter_zero_phase(&bs, &filter_zero_phase(&bp, sig)?)
}

/// Full-wave rectification, 10 Hz low-pass (zero-phase), clamp at zero.
pub fn emg_envelope<T: Real>(sig: &MultiChannelSignal<T>) -> Result<MultiChannelSignal<T>> {
    let lp = envelope_lowpass(sig.rate_hz())?;
    let rectified = sig.with_rows(sig.rows().iter().map(|r| r.iter().map(|v| v.abs()).collect()).collect())?;
    let smooth = filter_zero_phase(&lp, &rectified)?;
    let clamped = smooth
        .rows()
        .iter()
        .map(|r| r.iter().map(|&v| v.max(T::zero())).collect())
        .collect();
    sig.with_rows(clamped)
}

/// Causal counterpart of [`preprocess_eeg`] for chunked input.
#[derive(Debug, Clone)]
pub struct EegStream<T> {
    bandpass: StreamingFilterState<T>,
}

impl<T: Real> EegStream<T> {
    pub fn new(n_channels: usize, rate_hz: f64) -> Result<Self> {
        let bp = Arc::new(eeg_bandpass(rate_hz)?);
        Ok(Self { bandpass: StreamingFilterState::new(bp, n_channels) })
    }

    pub fn n_channels(&self) -> usize {
        self.bandpass.n_channels()
    }

    /// Re-references and filters `chunk` in place.
    pub fn process(&mut self, chunk: &mut [Vec<T>]) -> Result<()> {
        car_in_place(chunk);
        self.bandpass.process_in_place(chunk)
    }

    pub fn reset(&mut self) {
        self.bandpass.reset();
    }
}

/// Causal EMG chain: band-pass, notch, rectify, low-pass, clamp.
#[derive(Debug, Clone)]
pub struct EnvelopeStream<T> {
    bandpass: StreamingFilterState<T>,
    notch: StreamingFilterState<T>,
    lowpass: StreamingFilterState<T>,
}

impl<T: Real> EnvelopeStream<T> {
    pub fn new(n_channels: usize) -> Result<Self> {
        let rate = ALIGNED_RATE_HZ;
        Ok(Self {
            bandpass: StreamingFilterState::new(Arc::new(emg_bandpass(rate)?), n_channels),
            notch: StreamingFilterState::new(Arc::new(notch(rate)?), n_channels),
            lowpass: StreamingFilterState::new(Arc::new(envelope_lowpass(rate)?), n_channels),
        })
    }

    pub fn process(&mut self, chunk: &mut [Vec<T>]) -> Result<()> {
        self.bandpass.process_in_place(chunk)?;
        self.notch.process_in_place(chunk)?;
        chunk.iter_mut().flatten().for_each(|v| *v = v.abs());
        self.lowpass.process_in_place(chunk)?;
        chunk.iter_mut().flatten().for_each(|v| *v = v.max(T::zero()));
        Ok(())
    }
}
