use ordnorm::projection::{check_characterization, project, LogWeights};
use ordnorm::testkit::brute_force_project;
use ordnorm::WeightVector;
use proptest::prelude::*;

fn beta_strategy(dims: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    dims.prop_flat_map(|d| prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], d))
        .prop_filter("some positive weight", |b| b.iter().any(|&v| v > 0.0))
}

fn beta_and_logs(
    dims: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    beta_strategy(dims).prop_flat_map(|beta| {
        let d = beta.len();
        (Just(beta), prop::collection::vec(-6.0f64..6.0, d))
    })
}

fn y_of(beta: &[f64], logs: &[f64]) -> Vec<f64> {
    let w = WeightVector::new(beta.to_vec()).unwrap();
    project(&w, &LogWeights::new(logs.to_vec()).unwrap())
        .unwrap()
        .y
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_barrier_reference((beta, logs) in beta_and_logs(2..=6)) {
        let w = WeightVector::new(beta).unwrap();
        let l = LogWeights::new(logs.clone()).unwrap();
        let r = project(&w, &l).unwrap();
        let p: Vec<f64> = logs.iter().map(|v| v.exp()).collect();
        let reference = brute_force_project(&w, &p).unwrap();
        prop_assert!(max_gap(&r.y, &reference) <= 1e-6, "{:?} vs {:?}", r.y, reference);
        let report = check_characterization(&w, &l, &r.y);
        prop_assert!(report.passed, "{:?}", report.violation);
    }

    #[test]
    fn output_lies_in_the_dual_ball((beta, logs) in beta_and_logs(2..=40)) {
        let w = WeightVector::new(beta.clone()).unwrap();
        let y = y_of(&beta, &logs);
        prop_assert!(y.iter().all(|&v| v >= 0.0));
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.evaluate_dual(&y).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn equivariant_under_permutation((beta, logs) in beta_and_logs(2..=12), rotate in 0usize..12) {
        let d = logs.len();
        let k = rotate % d;
        let mut moved = logs.clone();
        moved.rotate_left(k);
        let mut y = y_of(&beta, &logs);
        y.rotate_left(k);
        prop_assert!(max_gap(&y, &y_of(&beta, &moved)) <= 1e-12);
    }

    #[test]
    fn invariant_under_log_shift((beta, logs) in beta_and_logs(2..=12), shift in -50.0f64..50.0) {
        let shifted: Vec<f64> = logs.iter().map(|v| v + shift).collect();
        prop_assert!(max_gap(&y_of(&beta, &logs), &y_of(&beta, &shifted)) <= 1e-12);
    }

    #[test]
    fn conjugate_value_matches_direct_sum((beta, logs) in beta_and_logs(2..=30)) {
        let w = WeightVector::new(beta).unwrap();
        let r = project(&w, &LogWeights::new(logs.clone()).unwrap()).unwrap();
        let direct: f64 = r
            .y
            .iter()
            .zip(&logs)
            .filter(|(y, _)| **y > 0.0)
            .map(|(y, l)| y * l - y * y.ln())
            .sum();
        prop_assert!((r.conjugate_value() - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn contraction(
        (beta, logs) in beta_and_logs(2..=50),
        xi in 1.0f64..10.0,
        mix in prop::collection::vec(0.0f64..1.0, 50),
    ) {
        // q ≤ p ≤ ξ q componentwise
        let q = logs.clone();
        let p: Vec<f64> = q.iter().zip(&mix).map(|(v, m)| v + m * xi.ln()).collect();
        let (yp, yq) = (y_of(&beta, &p), y_of(&beta, &q));
        for (a, b) in yp.iter().zip(&yq) {
            prop_assert!(*a <= xi * b + 1e-9, "{a} > {xi} * {b}");
        }
    }
}

#[test]
fn special_cases_exact() {
    let p = [3.0, 1.0, 0.5, 2.5];
    let logs = LogWeights::from_weights(&p).unwrap();
    let total: f64 = p.iter().sum();
    let r = project(&WeightVector::linf(4).unwrap(), &logs).unwrap();
    assert!(max_gap(&r.y, &p.map(|v| v / total)) <= 1e-12);
    let r = project(&WeightVector::uniform(4).unwrap(), &logs).unwrap();
    assert!(max_gap(&r.y, &[0.25; 4]) <= 1e-12);
}

#[test]
fn huge_log_weights_stay_finite() {
    let w = WeightVector::new(vec![0.6, 0.3, 0.1]).unwrap();
    let r = project(&w, &LogWeights::new(vec![1e6, 1e6 - 1.0, -1e6]).unwrap()).unwrap();
    assert!(r.y.iter().all(|v| v.is_finite()));
    assert!((r.y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(r.conjugate_value().is_finite());
}
