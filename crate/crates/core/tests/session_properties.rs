use bmui_core::session::{load_session, save_session};
use bmui_core::signal::{resampled_len, MovementLabel, MultiChannelSignal, RawSession};
use proptest::prelude::*;

fn block(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, Just(0.0)], cols), rows)
}

fn session() -> impl Strategy<Value = RawSession<f64>> {
    (1usize..4, 1usize..4, 1usize..3, 1usize..400)
        .prop_flat_map(|(ne, nm, nf, n)| {
            let n_eeg = n.div_ceil(2);
            let n_force = resampled_len(n, 1000.0, 6.6);
            (block(ne, n_eeg), block(nm, n), block(nf, n_force), prop::collection::vec("[a-z]{1,6}-(low|high)", 0..4))
        })
        .prop_map(|(eeg, emg, force, labels)| RawSession {
            subject_id: "s01".into(),
            eeg: MultiChannelSignal::from_rows(500.0, "eeg", eeg).unwrap(),
            emg: MultiChannelSignal::from_rows(1000.0, "emg", emg).unwrap(),
            force: MultiChannelSignal::from_rows(6.6, "force", force).unwrap(),
            movement_labels: labels
                .into_iter()
                .enumerate()
                .map(|(trial_index, label)| MovementLabel { trial_index, label })
                .collect(),
        })
}

fn close(a: &MultiChannelSignal<f64>, b: &MultiChannelSignal<f64>) -> bool {
    a.rate_hz() == b.rate_hz()
        && a.channel_names() == b.channel_names()
        && a.rows().iter().flatten().zip(b.rows().iter().flatten()).all(|(x, y)| (x - y).abs() <= 5e-9 * x.abs())
        && a.n_samples() == b.n_samples()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_within_nine_significant_digits(s in session()) {
        let dir = tempfile::tempdir().unwrap();
        save_session(&s, dir.path()).unwrap();
        let back: RawSession<f64> = load_session(dir.path()).unwrap();
        prop_assert_eq!(&back.subject_id, &s.subject_id);
        prop_assert_eq!(&back.movement_labels, &s.movement_labels);
        prop_assert!(close(&back.eeg, &s.eeg));
        prop_assert!(close(&back.emg, &s.emg));
        prop_assert!(close(&back.force, &s.force));
    }
}
