use proptest::prelude::*;
use semdiff_core::audit::{average_ranks, distinguishability, mae, mean, spearman, ScoreSeries};
use semdiff_oracles::{average_ranks_by_counting, fsum, spearman_rho};

fn tied_series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..30).prop_flat_map(|n| {
        let v = proptest::collection::vec((0u8..6).prop_map(|k| k as f64 / 5.0), n);
        (v.clone(), v)
    })
}

fn non_constant(xs: &[f64]) -> bool {
    xs.iter().any(|v| *v != xs[0])
}

proptest! {
    #[test]
    fn ranks_match_counting(xs in proptest::collection::vec(-5i8..5, 0..40)) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        prop_assert_eq!(average_ranks(&xs), average_ranks_by_counting(&xs));
    }

    #[test]
    fn spearman_matches_oracle_with_ties((x, y) in tied_series()) {
        prop_assume!(non_constant(&x) && non_constant(&y));
        let s = spearman(&x, &y).unwrap();
        prop_assert!((s.rho - spearman_rho(&x, &y).clamp(-1.0, 1.0)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&s.p_value));
    }

    #[test]
    fn spearman_invariant_under_monotone_maps((x, y) in tied_series()) {
        prop_assume!(non_constant(&x) && non_constant(&y));
        let cubed: Vec<f64> = x.iter().map(|v| (v - 0.3).powi(3)).collect();
        let exp: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        prop_assert_eq!(spearman(&x, &y).unwrap(), spearman(&cubed, &exp).unwrap());
    }

    #[test]
    fn mae_nonnegative_and_zero_on_truth(t in proptest::collection::vec(0.0f64..=1.0, 1..30), s in proptest::collection::vec(0.0f64..=1.0, 30)) {
        let s = s[..t.len()].to_vec();
        prop_assert!(mae(&ScoreSeries::new("m", s, t.clone()).unwrap()) >= 0.0);
        prop_assert_eq!(mae(&ScoreSeries::new("m", t.clone(), t).unwrap()), 0.0);
    }

    #[test]
    fn mean_is_correctly_rounded(xs in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
        prop_assert_eq!(mean(&xs).unwrap(), fsum(&xs) / xs.len() as f64);
    }

    #[test]
    fn distinguishability_scale_invariant(
        intra in proptest::collection::vec(0.01f64..=1.0, 1..20),
        inter in proptest::collection::vec(0.01f64..=1.0, 1..20),
        lambda in prop::sample::select(vec![0.1, 3.7, 0.5, 2.0]),
    ) {
        let d = distinguishability(&intra, &inter).unwrap();
        let scale = |v: &[f64]| v.iter().map(|x| x * lambda).collect::<Vec<_>>();
        let ds = distinguishability(&scale(&intra), &scale(&inter)).unwrap();
        prop_assert!((d - ds).abs() <= 1e-12 * d.abs(), "{d} vs {ds}");
    }
}

#[test]
fn power_of_two_scaling_is_bit_exact() {
    let intra = [0.9, 0.75, 0.6];
    let inter = [0.3, 0.45];
    let d = distinguishability(&intra, &inter).unwrap();
    for lambda in [0.5, 2.0, 0.125] {
        let s = |v: &[f64]| v.iter().map(|x| x * lambda).collect::<Vec<_>>();
        assert_eq!(distinguishability(&s(&intra), &s(&inter)).unwrap(), d);
    }
}
