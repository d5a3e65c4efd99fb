//! Second-order sections, batch and streaming application.

use std::sync::Arc;

use num_complex::Complex64;

use super::design::FilterDesign;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::MultiChannelSignal;

/// One second-order section normalised to `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub a1: T,
    pub a2: T,
}

impl<T: Real> Biquad<T> {
    pub fn new(b0: T, b1: T, b2: T, a1: T, a2: T) -> Self {
        Self { b0, b1, b2, a1, a2 }
    }

    /// Transposed direct form II update.
    #[inline(always)]
    fn tick(&self, x: T, s: &mut [T; 2]) -> T {
        let y = self.b0 * x + s[0];
        s[0] = self.b1 * x - self.a1 * y + s[1];
        s[1] = self.b2 * x - self.a2 * y;
        y
    }

    /// Registers holding a constant input `x` at steady state.
    fn steady_state(&self, x: T) -> ([T; 2], T) {
        let y = (self.b0 + self.b1 + self.b2) / (T::one() + self.a1 + self.a2) * x;
        let s1 = self.b2 * x - self.a2 * y;
        let s0 = self.b1 * x - self.a1 * y + s1;
        ([s0, s1], y)
    }

    fn pole_radius(&self) -> f64 {
        let a1 = self.a1.as_f64();
        let a2 = self.a2.as_f64();
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        let r1 = ((-a1 + disc) * 0.5).norm();
        let r2 = ((-a1 - disc) * 0.5).norm();
        r1.max(r2)
    }
}

/// Cascade of biquads together with the design it realises.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade<T> {
    sections: Vec<Biquad<T>>,
    design: FilterDesign,
}

impl<T: Real> BiquadCascade<T> {
    pub fn new(sections: Vec<Biquad<T>>, design: FilterDesign) -> Self {
        Self { sections, design }
    }

    pub fn sections(&self) -> &[Biquad<T>] {
        &self.sections
    }

    pub fn design(&self) -> &FilterDesign {
        &self.design
    }

    pub fn rate_hz(&self) -> f64 {
        self.design.rate_hz
    }

    /// Largest pole magnitude over all sections.
    pub fn max_pole_radius(&self) -> f64 {
        self.sections.iter().map(Biquad::pole_radius).fold(0.0, f64::max)
    }

    /// `H(e^{jω})` at `f_hz`.
    pub fn frequency_response(&self, f_hz: f64) -> Complex64 {
        let zinv = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f_hz / self.design.rate_hz);
        let zinv2 = zinv * zinv;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s.b0.as_f64() + zinv * s.b1.as_f64() + zinv2 * s.b2.as_f64();
            let den = 1.0 + zinv * s.a1.as_f64() + zinv2 * s.a2.as_f64();
            acc * num / den
        })
    }

    /// Reflective padding used by [`filter_zero_phase`]: three times the
    /// order of the realised transfer function.
    pub fn pad_len(&self) -> usize {
        3 * 2 * self.design.order
    }

    fn run(&self, x: &[T], state: &mut [[T; 2]]) -> Vec<T> {
        x.iter()
            .map(|&v| {
                self.sections
                    .iter()
                    .zip(state.iter_mut())
                    .fold(v, |acc, (sec, s)| sec.tick(acc, s))
            })
            .collect()
    }

    /// Single causal pass from all-zero registers.
    pub fn filter_causal(&self, x: &[T]) -> Vec<T> {
        let mut state = vec![[T::zero(); 2]; self.sections.len()];
        self.run(x, &mut state)
    }

    /// Causal pass with registers primed to steady state for `x[0]`.
    fn filter_primed(&self, x: &[T]) -> Vec<T> {
        let mut level = x[0];
        let mut state: Vec<[T; 2]> = Vec::with_capacity(self.sections.len());
        for sec in &self.sections {
            let (s, y) = sec.steady_state(level);
            state.push(s);
            level = y;
        }
        self.run(x, &mut state)
    }

    /// Forward-backward filtering of one channel with odd reflective
    /// padding at both ends.
    pub fn filter_zero_phase_row(&self, x: &[T]) -> Result<Vec<T>> {
        let pad = self.pad_len();
        let n = x.len();
        if n <= pad {
            return Err(Error::SignalTooShort { len: n, needed: pad });
        }
        let two = T::lit(2.0);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| two * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| two * x[n - 1] - x[n - 1 - i]));

        let mut y = self.filter_primed(&ext);
        y.reverse();
        let mut y = self.filter_primed(&y);
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}

fn check_rate<T: Real>(cascade: &BiquadCascade<T>, sig: &MultiChannelSignal<T>) -> Result<()> {
    if (cascade.rate_hz() - sig.rate_hz()).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "filter designed for {} Hz applied to {} Hz signal",
            cascade.rate_hz(),
            sig.rate_hz()
        )));
    }
    Ok(())
}

/// Zero-phase (forward-backward) filtering of every channel.
pub fn filter_zero_phase<T: Real>(cascade: &BiquadCascade<T>, sig: &MultiChannelSignal<T>) -> Result<MultiChannelSignal<T>> {
    check_rate(cascade, sig)?;
    let rows = sig
        .rows()
        .iter()
        .map(|r| cascade.filter_zero_phase_row(r))
        .collect::<Result<Vec<_>>>()?;
    sig.with_rows(rows)
}

/// Single causal pass over every channel from all-zero registers.
pub fn filter_causal<T: Real>(cascade: &BiquadCascade<T>, sig: &MultiChannelSignal<T>) -> Result<MultiChannelSignal<T>> {
    check_rate(cascade, sig)?;
    sig.with_rows(sig.rows().iter().map(|r| cascade.filter_causal(r)).collect())
}

/// Per-channel delay registers for chunked causal filtering.
///
/// Concatenating the outputs of successive [`process`](Self::process)
/// calls reproduces [`BiquadCascade::filter_causal`] over the whole
/// stream regardless of how it was chunked.
#[derive(Debug, Clone)]
pub struct StreamingFilterState<T> {
    cascade: Arc<BiquadCascade<T>>,
    registers: Vec<Vec<[T; 2]>>,
}

impl<T: Real> StreamingFilterState<T> {
    pub fn new(cascade: Arc<BiquadCascade<T>>, n_channels: usize) -> Self {
        let registers = vec![vec![[T::zero(); 2]; cascade.sections.len()]; n_channels];
        Self { cascade, registers }
    }

    pub fn n_channels(&self) -> usize {
        self.registers.len()
    }

    pub fn cascade(&self) -> &BiquadCascade<T> {
        &self.cascade
    }

    pub fn reset(&mut self) {
        for ch in &mut self.registers {
            ch.iter_mut().for_each(|s| *s = [T::zero(); 2]);
        }
    }

    /// Filters one chunk (`[n_channels][n]`), advancing the registers.
    pub fn process(&mut self, chunk: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        if chunk.len() != self.registers.len() {
            return Err(Error::InvalidArgument(format!(
                "chunk has {} channels, filter state has {}",
                chunk.len(),
                self.registers.len()
            )));
        }
        Ok(chunk
            .iter()
            .zip(self.registers.iter_mut())
            .map(|(x, regs)| self.cascade.run(x, regs))
            .collect())
    }

    /// In-place variant of [`process`](Self::process).
    pub fn process_in_place(&mut self, chunk: &mut [Vec<T>]) -> Result<()> {
        if chunk.len() != self.registers.len() {
            return Err(Error::InvalidArgument(format!(
                "chunk has {} channels, filter state has {}",
                chunk.len(),
                self.registers.len()
            )));
        }
        for (x, regs) in chunk.iter_mut().zip(self.registers.iter_mut()) {
            for v in x.iter_mut() {
                *v = self
                    .cascade
                    .sections
                    .iter()
                    .zip(regs.iter_mut())
                    .fold(*v, |acc, (sec, s)| sec.tick(acc, s));
            }
        }
        Ok(())
    }
}

/// Functional form of [`StreamingFilterState::process`].
pub fn filter_streaming<T: Real>(state: &mut StreamingFilterState<T>, chunk: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    state.process(chunk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::design::{design_butterworth, FilterDesign};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bandpass() -> Arc<BiquadCascade<f64>> {
        Arc::new(design_butterworth(&FilterDesign::bandpass(4, 15.0, 35.0, 1000.0)).unwrap())
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn one_sample_chunks_match_whole_signal() {
        let c = bandpass();
        let x = noise(1000, 1);
        let whole = c.filter_causal(&x);
        let mut st = StreamingFilterState::new(c.clone(), 1);
        let mut out = Vec::new();
        for &v in &x {
            out.extend(st.process(&[vec![v]]).unwrap().remove(0));
        }
        let diff = whole.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-9);
    }

    #[test]
    fn impulse_matches_direct_form_recurrence() {
        let c = bandpass();
        // Each section as a direct-form I difference equation, chained.
        let n = 300;
        let mut y = vec![0.0; n];
        y[0] = 1.0;
        for s in c.sections() {
            let x = y.clone();
            for t in 0..n {
                let xm = |k: usize| if t >= k { x[t - k] } else { 0.0 };
                let ym1 = if t >= 1 { y[t - 1] } else { 0.0 };
                let ym2 = if t >= 2 { y[t - 2] } else { 0.0 };
                y[t] = s.b0 * xm(0) + s.b1 * xm(1) + s.b2 * xm(2) - s.a1 * ym1 - s.a2 * ym2;
            }
        }
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        let mut st = StreamingFilterState::new(c, 1);
        let got = st.process(&[x]).unwrap().remove(0);
        for (g, w) in got.iter().zip(&y) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let c = bandpass();
        let mut st = StreamingFilterState::new(c.clone(), 2);
        let out = st.process(&[vec![0.0; 64], vec![0.0; 64]]).unwrap();
        assert!(out.iter().flatten().all(|&v| v == 0.0));
        assert!(c.filter_zero_phase_row(&[0.0; 100]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_mismatch_and_short_signal() {
        let c = bandpass();
        let mut st = StreamingFilterState::new(c.clone(), 2);
        assert!(matches!(st.process(&[vec![0.0; 4]]), Err(Error::InvalidArgument(_))));
        assert!(matches!(c.filter_zero_phase_row(&[1.0; 24]), Err(Error::SignalTooShort { .. })));
        let sig = MultiChannelSignal::from_rows(500.0, "c", vec![vec![0.0; 200]]).unwrap();
        assert!(matches!(filter_zero_phase(&c, &sig), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_phase_keeps_symmetric_pulse_centred() {
        let c = Arc::new(design_butterworth(&FilterDesign::lowpass(4, 30.0, 1000.0)).unwrap());
        let n = 801;
        let x: Vec<f64> = (0..n).map(|i| (-((i as f64 - 400.0) / 15.0).powi(2)).exp()).collect();
        let y = c.filter_zero_phase_row(&x).unwrap();
        let peak = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((peak as i64 - 400).abs() <= 1);
        let causal = c.filter_causal(&x);
        let causal_peak = causal.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(causal_peak > 405, "causal filtering should delay the pulse");
    }

    #[test]
    fn in_place_matches_process() {
        let c = bandpass();
        let x = vec![noise(257, 3), noise(257, 4)];
        let mut a = StreamingFilterState::new(c.clone(), 2);
        let mut b = StreamingFilterState::new(c, 2);
        let want = a.process(&x).unwrap();
        let mut got = x.clone();
        b.process_in_place(&mut got).unwrap();
        assert_eq!(want, got);
    }
}
