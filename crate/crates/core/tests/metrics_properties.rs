use bmui_core::metrics::{one_sample_t_test, pearson, ranks, spearman};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn non_constant(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, n).prop_filter("non-constant", |v| v.iter().any(|x| *x != v[0]))
}

/// Tie-free pair: two random permutations of distinct values.
fn tie_free_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..200, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 7.0).collect();
        let mut y: Vec<f64> = (0..n).map(|i| (i as f64).powi(2)).collect();
        x.shuffle(&mut rng);
        y.shuffle(&mut rng);
        (x, y)
    })
}

proptest! {
    #[test]
    fn spearman_is_symmetric(x in non_constant(3..60), seed in any::<u64>()) {
        let mut y = x.clone();
        y.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(spearman(&x, &y).unwrap(), spearman(&y, &x).unwrap());
        prop_assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_ignores_increasing_maps(
        x in non_constant(3..80),
        y in non_constant(3..80),
        a in 0.01..5.0f64,
        b in 0.0..2.0f64,
        c in -10.0..10.0f64,
    ) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        prop_assume!(x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]));
        let f = |v: f64| a * v + b * (v / 50.0).powi(3) + c;
        let g = |v: f64| (v / 40.0).exp();
        let fx: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let gy: Vec<f64> = y.iter().map(|&v| g(v)).collect();
        let base = spearman(x, y).unwrap();
        prop_assert!((spearman(&fx, &gy).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn shortcut_formula_without_ties((x, y) in tie_free_pair()) {
        let n = x.len() as f64;
        let d2: f64 = ranks(&x).iter().zip(ranks(&y)).map(|(a, b)| (a - b).powi(2)).sum();
        let shortcut = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        prop_assert!((spearman(&x, &y).unwrap() - shortcut).abs() <= 1e-12);
        prop_assert!((pearson(&ranks(&x), &ranks(&y)).unwrap() - shortcut).abs() <= 1e-12);
    }

    #[test]
    fn t_test_p_falls_as_mean_rises(
        base in prop::collection::vec(-1.0..1.0f64, 3..30),
        d1 in -2.0..2.0f64,
        step in 0.001..2.0f64,
    ) {
        prop_assume!(base.iter().any(|v| (v - base[0]).abs() > 1e-6));
        let shift = |d: f64| base.iter().map(|v| v + d).collect::<Vec<_>>();
        let lo = one_sample_t_test(&shift(d1), 0.0).unwrap();
        let hi = one_sample_t_test(&shift(d1 + step), 0.0).unwrap();
        prop_assert!(hi.t > lo.t);
        prop_assert!(hi.p_one_sided <= lo.p_one_sided);
        prop_assert!((0.0..=1.0).contains(&hi.p_one_sided));
    }
}
