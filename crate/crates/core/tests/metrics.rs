use ndarray::array;
use proptest::prelude::*;

use mixdiff_core::datasets::SampleSet;
use mixdiff_core::metrics::{ks_two_sample, reverse_effort_closed, reverse_effort_mc, w1_distance};
use mixdiff_core::prior::MixturePrior;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..20)
}

proptest! {
    #[test]
    fn w1_is_a_metric(a in sample(), b in sample(), c in sample()) {
        let ab = w1_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - w1_distance(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(ab <= w1_distance(&a, &c).unwrap() + w1_distance(&c, &b).unwrap() + 1e-9);
        prop_assert!(w1_distance(&a, &a).unwrap() == 0.0);
    }

    #[test]
    fn ks_ignores_increasing_transforms(a in sample(), b in sample()) {
        let f = |x: &f64| x.powi(3) + x.exp();
        let (fa, fb): (Vec<f64>, Vec<f64>) = (a.iter().map(f).collect(), b.iter().map(f).collect());
        let d = ks_two_sample(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_two_sample(&fa, &fb).unwrap());
        prop_assert_eq!(d, ks_two_sample(&b, &a).unwrap());
    }

    #[test]
    fn w1_shift_equals_offset(a in sample(), shift in -5.0f64..5.0) {
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        prop_assert!((w1_distance(&a, &b).unwrap() - shift.abs()).abs() < 1e-9);
    }
}

fn two_points() -> (SampleSet, MixturePrior) {
    let data = SampleSet::new(array![[1.0, 0.0], [-1.0, 0.0]], None).unwrap();
    let prior = MixturePrior::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
    (data, prior)
}

#[test]
fn closed_form_efforts() {
    let (data, prior) = two_points();
    let r = reverse_effort_closed(&data, &prior, 1.0).unwrap();
    assert_eq!((r.closed_form_classical, r.closed_form_mixed, r.reduction), (3.0, 2.0, 1.0));
    assert!(r.centers_are_cell_means);
    let r = reverse_effort_closed(&data, &prior, 5.0).unwrap();
    assert_eq!((r.closed_form_classical, r.reduction), (51.0, 1.0));
    let origin = MixturePrior::new(vec![vec![0.0, 0.0]], vec![1.0], vec![1.0]).unwrap();
    let r = reverse_effort_closed(&data, &origin, 1.0).unwrap();
    assert_eq!(r.reduction, 0.0);
    assert_eq!(r.closed_form_mixed, r.closed_form_classical);
}

#[test]
fn monte_carlo_efforts_converge() {
    let (data, prior) = two_points();
    let m = reverse_effort_mc(&data, &prior, true, 100_000, 1).unwrap();
    assert!((m.mean - 2.0).abs() < 5.0 * m.stderr, "{m:?}");
    let zero = SampleSet::from_values(&[0.0]).unwrap();
    let c = reverse_effort_mc(&zero, &MixturePrior::standard(1, 1.0).unwrap(), false, 100_000, 2).unwrap();
    assert!((c.mean - 1.0).abs() < 5.0 * c.stderr, "{c:?}");
}

#[test]
fn single_centered_prior_couples_trivially() {
    let (data, _) = two_points();
    let prior = MixturePrior::standard(2, 1.0).unwrap();
    let a = reverse_effort_mc(&data, &prior, true, 50_000, 3).unwrap();
    let b = reverse_effort_mc(&data, &prior, false, 50_000, 4).unwrap();
    assert!((a.mean - b.mean).abs() < 5.0 * a.stderr.hypot(b.stderr));
}
