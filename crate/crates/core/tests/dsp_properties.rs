use bmui_core::dsp::{car, design_butterworth, filter_causal, FilterDesign, StreamingFilterState};
use bmui_core::signal::{resample, MultiChannelSignal};
use proptest::prelude::*;
use std::sync::Arc;

fn signal(rows: Vec<Vec<f64>>, rate: f64) -> MultiChannelSignal<f64> {
    MultiChannelSignal::from_rows(rate, "ch", rows).unwrap()
}

fn rows_strategy(max_ch: usize, max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_ch, 2..=max_len).prop_flat_map(|(c, n)| prop::collection::vec(prop::collection::vec(-1e3..1e3f64, n), c))
}

fn eeg_band() -> FilterDesign {
    FilterDesign::bandpass(4, 15.0, 35.0, 1000.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn car_output_sums_to_zero(rows in rows_strategy(20, 200)) {
        let scale = rows.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        let out = car(&signal(rows, 500.0));
        for t in 0..out.n_samples() {
            let s: f64 = out.rows().iter().map(|r| r[t]).sum();
            prop_assert!(s.abs() <= 1e-9 * scale, "sum {s} at {t}");
        }
    }

    #[test]
    fn causal_filter_is_linear(
        x in prop::collection::vec(-1.0..1.0f64, 50..400),
        seed in any::<u64>(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..x.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = design_butterworth::<f64>(&eeg_band()).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = c.filter_causal(&mix);
        let (fx, fy) = (c.filter_causal(&x), c.filter_causal(&y));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-8);
        }
    }

    #[test]
    fn streaming_matches_batch(
        rows in rows_strategy(4, 600),
        cuts in prop::collection::vec(0.0..1.0f64, 0..12),
    ) {
        let sig = signal(rows, 1000.0);
        let c = Arc::new(design_butterworth::<f64>(&eeg_band()).unwrap());
        let batch = filter_causal(&c, &sig).unwrap();
        let n = sig.n_samples();
        let mut bounds: Vec<usize> = cuts.iter().map(|f| (f * n as f64) as usize).collect();
        bounds.extend([0, n]);
        bounds.sort_unstable();
        bounds.dedup();
        let mut state = StreamingFilterState::new(c, sig.n_channels());
        let mut streamed = vec![Vec::new(); sig.n_channels()];
        for w in bounds.windows(2) {
            let chunk: Vec<Vec<f64>> = sig.rows().iter().map(|r| r[w[0]..w[1]].to_vec()).collect();
            for (acc, part) in streamed.iter_mut().zip(state.process(&chunk).unwrap()) {
                acc.extend(part);
            }
        }
        for (s, b) in streamed.iter().zip(batch.rows()) {
            for (p, q) in s.iter().zip(b) {
                prop_assert!((p - q).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn designed_cascades_are_stable(order in (1usize..=4).prop_map(|k| 2 * k), lo in 1.0..200.0f64, width in 5.0..250.0f64, rate in prop::sample::select(vec![500.0, 1000.0])) {
        let hi = (lo + width).min(rate / 2.0 - 1.0);
        prop_assume!(hi > lo + 1.0);
        for d in [FilterDesign::bandpass(order, lo, hi, rate), FilterDesign::bandstop(order, lo, hi, rate), FilterDesign::lowpass(order, lo, rate)] {
            let c = design_butterworth::<f64>(&d).unwrap();
            prop_assert!(c.max_pole_radius() < 1.0 - 1e-6, "{d:?}: {}", c.max_pole_radius());
        }
    }

    #[test]
    fn resample_stays_within_channel_bounds(rows in rows_strategy(3, 300), src in prop::sample::select(vec![6.6, 250.0, 500.0])) {
        let sig = signal(rows, src);
        let out = resample(&sig, 1000.0).unwrap();
        for (r_in, r_out) in sig.rows().iter().zip(out.rows()) {
            let lo = r_in.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = r_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r_out.iter().all(|&v| v >= lo && v <= hi));
            prop_assert_eq!(r_out[0], r_in[0]);
        }
    }

    #[test]
    fn resample_to_same_rate_is_identity(rows in rows_strategy(3, 100)) {
        let sig = signal(rows, 1000.0);
        prop_assert_eq!(resample(&sig, 1000.0).unwrap(), sig);
    }
}
