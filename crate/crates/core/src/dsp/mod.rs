//! Filtering: common average reference, Butterworth cascades (zero-phase
//! batch and causal streaming), EMG envelopes and the fixed EEG/EMG
//! preprocessing chains.

mod biquad;
mod design;
mod pipeline;

pub use biquad::{filter_causal, filter_streaming, filter_zero_phase, Biquad, BiquadCascade, StreamingFilterState};
pub use design::{design_butterworth, FilterDesign, FilterKind};
pub use pipeline::{
    emg_envelope, preprocess_eeg, preprocess_emg, EegStream, EnvelopeStream, EEG_BAND_HZ, EMG_BAND_HZ,
    ENVELOPE_CUTOFF_HZ, FILTER_ORDER, NOTCH_BAND_HZ,
};

use crate::scalar::Real;
use crate::signal::MultiChannelSignal;

/// Subtracts the cross-channel mean from every channel at every sample.
pub fn car<T: Real>(sig: &MultiChannelSignal<T>) -> MultiChannelSignal<T> {
    let mut rows = sig.rows().to_vec();
    car_in_place(&mut rows);
    sig.with_rows(rows).expect("CAR preserves signal shape")
}

/// [`car`] on raw channel-major rows.
pub fn car_in_place<T: Real>(rows: &mut [Vec<T>]) {
    let c = rows.len();
    if c == 0 {
        return;
    }
    let inv = T::one() / T::from_usize_lossy(c);
    let n = rows[0].len();
    for t in 0..n {
        // shifted sum: identical channels give exactly zero
        let base = rows[0][t];
        let mean = base + rows.iter().map(|r| r[t] - base).sum::<T>() * inv;
        for r in rows.iter_mut() {
            r[t] -= mean;
        }
    }
}
