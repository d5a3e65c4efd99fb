//! Butterworth design via the bilinear transform with frequency pre-warping.
//!
//! `order` is the order of the analog low-pass prototype, so band-pass and
//! band-stop designs have `2 * order` poles (`order` biquads) while low-pass
//! designs have `order` poles (`order / 2` biquads).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::biquad::{Biquad, BiquadCascade};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Bandpass,
    Bandstop,
    Lowpass,
}

/// What a cascade was designed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub kind: FilterKind,
    pub order: usize,
    pub corners_hz: Vec<f64>,
    pub rate_hz: f64,
}

impl FilterDesign {
    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, rate_hz: f64) -> Self {
        Self { kind: FilterKind::Bandpass, order, corners_hz: vec![low_hz, high_hz], rate_hz }
    }

    pub fn bandstop(order: usize, low_hz: f64, high_hz: f64, rate_hz: f64) -> Self {
        Self { kind: FilterKind::Bandstop, order, corners_hz: vec![low_hz, high_hz], rate_hz }
    }

    pub fn lowpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> Self {
        Self { kind: FilterKind::Lowpass, order, corners_hz: vec![cutoff_hz], rate_hz }
    }

    /// Digital frequency at which the designed response has unit gain.
    pub fn reference_hz(&self) -> f64 {
        match self.kind {
            FilterKind::Lowpass | FilterKind::Bandstop => 0.0,
            FilterKind::Bandpass => {
                let w0 = (prewarp(self.corners_hz[0], self.rate_hz) * prewarp(self.corners_hz[1], self.rate_hz)).sqrt();
                self.rate_hz / std::f64::consts::PI * (w0 / (2.0 * self.rate_hz)).atan()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::InvalidDesign(format!("sample rate {} Hz", self.rate_hz)));
        }
        if self.order % 2 == 1 {
            return Err(Error::Unsupported(format!("odd filter order {}", self.order)));
        }
        if !matches!(self.order, 2 | 4 | 6 | 8) {
            return Err(Error::InvalidDesign(format!("order {} not in {{2, 4, 6, 8}}", self.order)));
        }
        let expected = if self.kind == FilterKind::Lowpass { 1 } else { 2 };
        if self.corners_hz.len() != expected {
            return Err(Error::InvalidDesign(format!(
                "{:?} needs {expected} corner frequencies",
                self.kind
            )));
        }
        let nyquist = self.rate_hz / 2.0;
        for &f in &self.corners_hz {
            if !(f > 0.0 && f < nyquist) {
                return Err(Error::InvalidDesign(format!("corner {f} Hz outside (0, {nyquist}) Hz")));
            }
        }
        if expected == 2 && self.corners_hz[0] >= self.corners_hz[1] {
            return Err(Error::InvalidDesign(format!("band edges {:?} not increasing", self.corners_hz)));
        }
        Ok(())
    }
}

fn prewarp(f_hz: f64, rate_hz: f64) -> f64 {
    2.0 * rate_hz * (std::f64::consts::PI * f_hz / rate_hz).tan()
}

/// Left-half-plane poles of the unit-cutoff Butterworth prototype.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n)))
        .collect()
}

fn quadratic_roots(b: Complex64, c: Complex64) -> [Complex64; 2] {
    // roots of s^2 - b s + c
    let disc = (b * b - 4.0 * c).sqrt();
    [(b + disc) * 0.5, (b - disc) * 0.5]
}

fn bilinear(s: Complex64, rate_hz: f64) -> Complex64 {
    let k = 2.0 * rate_hz;
    (k + s) / (k - s)
}

/// Designs a Butterworth cascade of second-order sections.
pub fn design_butterworth<T: Real>(design: &FilterDesign) -> Result<BiquadCascade<T>> {
    design.validate()?;
    let fs = design.rate_hz;
    let proto = prototype_poles(design.order);

    let analog_poles: Vec<Complex64> = match design.kind {
        FilterKind::Lowpass => {
            let wc = prewarp(design.corners_hz[0], fs);
            proto.iter().map(|p| p * wc).collect()
        }
        FilterKind::Bandpass | FilterKind::Bandstop => {
            let w1 = prewarp(design.corners_hz[0], fs);
            let w2 = prewarp(design.corners_hz[1], fs);
            let w0_sq = Complex64::new(w1 * w2, 0.0);
            let bw = w2 - w1;
            proto
                .iter()
                .flat_map(|&p| {
                    let b = if design.kind == FilterKind::Bandpass { p * bw } else { bw / p };
                    quadratic_roots(b, w0_sq)
                })
                .collect()
        }
    };

    let mut upper: Vec<Complex64> = analog_poles
        .iter()
        .map(|&s| bilinear(s, fs))
        .filter(|z| z.im > 0.0)
        .collect();
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));

    let expected = match design.kind {
        FilterKind::Lowpass => design.order / 2,
        _ => design.order,
    };
    if upper.len() != expected {
        return Err(Error::InvalidDesign(format!(
            "expected {expected} complex pole pairs, found {}",
            upper.len()
        )));
    }

    let numerator = match design.kind {
        FilterKind::Lowpass => [1.0, 2.0, 1.0],
        FilterKind::Bandpass => [1.0, 0.0, -1.0],
        FilterKind::Bandstop => {
            let w0 = (prewarp(design.corners_hz[0], fs) * prewarp(design.corners_hz[1], fs)).sqrt();
            let zero = bilinear(Complex64::new(0.0, w0), fs);
            [1.0, -2.0 * zero.re, 1.0]
        }
    };

    let ref_hz = design.reference_hz();
    let sections = upper
        .iter()
        .map(|z| {
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            let unnormalized = section_response(numerator, a1, a2, ref_hz, fs);
            let g = 1.0 / unnormalized.norm();
            Biquad::new(
                T::lit(g * numerator[0]),
                T::lit(g * numerator[1]),
                T::lit(g * numerator[2]),
                T::lit(a1),
                T::lit(a2),
            )
        })
        .collect();
    Ok(BiquadCascade::new(sections, design.clone()))
}

fn section_response(b: [f64; 3], a1: f64, a2: f64, f_hz: f64, rate_hz: f64) -> Complex64 {
    let zinv = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f_hz / rate_hz);
    let zinv2 = zinv * zinv;
    (b[0] + zinv * b[1] + zinv2 * b[2]) / (1.0 + zinv * a1 + zinv2 * a2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    /// Magnitude the analog prototype predicts at a pre-warped frequency.
    fn analog_magnitude(design: &FilterDesign, f: f64) -> f64 {
        let fs = design.rate_hz;
        let w = prewarp(f, fs);
        let n = design.order as i32;
        let omega = match design.kind {
            FilterKind::Lowpass => w / prewarp(design.corners_hz[0], fs),
            FilterKind::Bandpass | FilterKind::Bandstop => {
                let w1 = prewarp(design.corners_hz[0], fs);
                let w2 = prewarp(design.corners_hz[1], fs);
                let x = (w * w - w1 * w2) / (w * (w2 - w1));
                if design.kind == FilterKind::Bandpass {
                    x
                } else {
                    1.0 / x
                }
            }
        };
        1.0 / (1.0 + omega.abs().powi(2 * n)).sqrt()
    }

    #[test]
    fn digital_matches_prewarped_analog() {
        let designs = [
            FilterDesign::bandpass(4, 15.0, 35.0, 1000.0),
            FilterDesign::bandpass(4, 20.0, 450.0, 1000.0),
            FilterDesign::bandstop(4, 48.0, 52.0, 1000.0),
            FilterDesign::lowpass(4, 10.0, 1000.0),
            FilterDesign::bandpass(2, 8.0, 12.0, 250.0),
            FilterDesign::lowpass(8, 100.0, 1000.0),
        ];
        for d in &designs {
            let c = design_butterworth::<f64>(d).unwrap();
            for f in [0.5, 3.0, 10.0, 24.0, 47.0, 50.5, 99.0, 230.0, 449.0] {
                if f >= d.rate_hz / 2.0 {
                    continue;
                }
                let got = c.frequency_response(f).norm();
                let want = analog_magnitude(d, f);
                assert!((got - want).abs() < 1e-9, "{d:?} at {f} Hz: {got} vs {want}");
            }
        }
    }

    #[test]
    fn section_counts_and_stability() {
        for order in [2, 4, 6, 8] {
            let bp = design_butterworth::<f64>(&FilterDesign::bandpass(order, 15.0, 35.0, 1000.0)).unwrap();
            assert_eq!(bp.sections().len(), order);
            let lp = design_butterworth::<f64>(&FilterDesign::lowpass(order, 10.0, 1000.0)).unwrap();
            assert_eq!(lp.sections().len(), order / 2);
            let bs = design_butterworth::<f64>(&FilterDesign::bandstop(order, 48.0, 52.0, 1000.0)).unwrap();
            for c in [&bp, &lp, &bs] {
                assert!(c.max_pole_radius() < 1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn documented_response_points() {
        let bp = design_butterworth::<f64>(&FilterDesign::bandpass(4, 15.0, 35.0, 1000.0)).unwrap();
        assert!(db(bp.frequency_response(25.0).norm()) >= -3.0);
        assert!(db(bp.frequency_response(0.0).norm().max(1e-300)) <= -40.0);
        let bs = design_butterworth::<f64>(&FilterDesign::bandstop(4, 48.0, 52.0, 1000.0)).unwrap();
        assert!(db(bs.frequency_response(50.0).norm()) <= -20.0);
        assert!(db(bs.frequency_response(30.0).norm()) >= -3.0);
    }

    #[test]
    fn rejects_bad_designs() {
        let nyq = FilterDesign::bandpass(4, 20.0, 500.0, 1000.0);
        assert!(matches!(design_butterworth::<f64>(&nyq), Err(Error::InvalidDesign(_))));
        let odd = FilterDesign::lowpass(3, 10.0, 1000.0);
        assert!(matches!(design_butterworth::<f64>(&odd), Err(Error::Unsupported(_))));
        let big = FilterDesign::lowpass(10, 10.0, 1000.0);
        assert!(matches!(design_butterworth::<f64>(&big), Err(Error::InvalidDesign(_))));
        let swapped = FilterDesign::bandstop(4, 52.0, 48.0, 1000.0);
        assert!(design_butterworth::<f64>(&swapped).is_err());
    }
}
