use dgrmsc::metrics;
use mvsc_oracles as oracle;
use proptest::prelude::*;

#[test]
fn small_fixture_against_oracles() {
    let t = [0, 0, 1, 1];
    let p = [0, 1, 1, 1];
    assert!((metrics::nmi(&t, &p).unwrap() - oracle::nmi_direct(&t, &p)).abs() < 1e-12);
    let pair = metrics::pair_metrics(&t, &p).unwrap();
    let (prec, rec, f) = oracle::pair_scores(&t, &p);
    assert_eq!((pair.precision, pair.recall, pair.f_measure), (prec, rec, f));
    // TP=1, FP=2, FN=1
    assert!((pair.precision - 1.0 / 3.0).abs() < 1e-15);
    assert!((pair.recall - 0.5).abs() < 1e-15);
    assert!((metrics::adjusted_rand(&t, &p).unwrap() - oracle::ari_from_pairs(&t, &p)).abs() < 1e-12);
}

#[test]
fn acc_fixture_against_permutation_search() {
    let t = [0, 0, 1, 1, 2, 2];
    let p = [1, 1, 0, 2, 2, 2];
    let a = metrics::acc(&t, &p).unwrap();
    assert_eq!(a, oracle::acc_by_permutation(&t, &p));
    assert!((a - 5.0 / 6.0).abs() < 1e-15);
}

fn labelings() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..=40, 1usize..=6, 1usize..=6).prop_flat_map(|(n, ct, cp)| {
        (
            proptest::collection::vec(0..ct, n),
            proptest::collection::vec(0..cp, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn metrics_match_exhaustive_oracles((t, p) in labelings()) {
        let acc = metrics::acc(&t, &p).unwrap();
        prop_assert!((acc - oracle::acc_by_permutation(&t, &p)).abs() <= 1e-12);

        let pair = metrics::pair_metrics(&t, &p).unwrap();
        let (prec, rec, f) = oracle::pair_scores(&t, &p);
        prop_assert!((pair.precision - prec).abs() <= 1e-12);
        prop_assert!((pair.recall - rec).abs() <= 1e-12);
        prop_assert!((pair.f_measure - f).abs() <= 1e-12);

        let ari = metrics::adjusted_rand(&t, &p).unwrap();
        prop_assert!((ari - oracle::ari_from_pairs(&t, &p)).abs() <= 1e-12);

        let nmi = metrics::nmi(&t, &p).unwrap();
        prop_assert!((nmi - oracle::nmi_direct(&t, &p)).abs() <= 1e-12);
    }

    #[test]
    fn metrics_are_bounded_and_relabeling_invariant((t, p) in labelings(), shift in 1usize..7) {
        let renamed: Vec<usize> = p.iter().map(|&l| (l + shift) % 7 + 3).collect();
        let a = metrics::evaluate(&t, &p).unwrap();
        let b = metrics::evaluate(&t, &renamed).unwrap();
        for (x, y) in a.as_array().into_iter().zip(b.as_array()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        for (i, v) in a.as_array().into_iter().enumerate() {
            let lo = if metrics::MetricValues::NAMES[i] == "ar" { -1.0 } else { 0.0 };
            prop_assert!(v >= lo - 1e-12 && v <= 1.0 + 1e-12, "{} = {v}", metrics::MetricValues::NAMES[i]);
        }
    }

    #[test]
    fn constant_prediction_acc_is_majority_share(t in proptest::collection::vec(0usize..5, 2..40)) {
        let p = vec![0; t.len()];
        let majority = (0..5).map(|c| t.iter().filter(|&&x| x == c).count()).max().unwrap();
        prop_assert!(metrics::acc(&t, &p).unwrap() >= majority as f64 / t.len() as f64 - 1e-15);
    }
}
