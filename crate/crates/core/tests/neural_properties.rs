use bmui_core::neural::{
    classifier_to_string, model_from_str, regressor_to_string, split_trials, ClassifierConfig, ClassifierModel, Model,
    RegressorConfig, RegressorModel, Standardizer,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn serialised_models_round_trip_exactly(seed in any::<u64>(), n_eeg in 1usize..5, n_emg in 1usize..4) {
        let r = RegressorModel::<f64>::new(RegressorConfig::tiny(n_eeg, n_emg), seed).unwrap();
        match model_from_str::<f64>(&regressor_to_string(&r)).unwrap() {
            Model::Regressor(back) => prop_assert_eq!(back, r),
            _ => prop_assert!(false, "wrong kind"),
        }
        let c = ClassifierModel::<f64>::new(ClassifierConfig::tiny(n_emg), seed).unwrap();
        match model_from_str::<f64>(&classifier_to_string(&c)).unwrap() {
            Model::Classifier(back) => prop_assert_eq!(back, c),
            _ => prop_assert!(false, "wrong kind"),
        }
    }

    #[test]
    fn standardizer_inverts(rows in prop::collection::vec(prop::collection::vec(-1e4..1e4f64, 3), 2..50)) {
        let s = Standardizer::fit((0..3).map(|c| rows.iter().map(|r| r[c]).collect::<Vec<_>>()));
        for r in &rows {
            let back = s.invert_vec(&s.apply_vec(r));
            for (a, b) in back.iter().zip(r) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn trial_split_is_a_partition(n in 3usize..200, seed in any::<u64>()) {
        let s = split_trials(&(0..n).collect::<Vec<_>>(), [0.7, 0.15, 0.15], seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
    }
}
