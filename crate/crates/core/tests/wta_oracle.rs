use dpmhp_core::metrics::{log_distance, squared_distance};
use dpmhp_core::wta::{wta_evaluate, wta_gradients};
use dpmhp_core::{Error, PointSet, WtaMetric};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight minimum over the metric's own distance, first index on ties.
fn brute_force(hyps: &PointSet, y: &[f64], metric: WtaMetric) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, h) in hyps.iter().enumerate() {
        let d = match metric {
            WtaMetric::SquaredEuclidean => squared_distance(h, y).unwrap(),
            WtaMetric::LogDistance { delta } => log_distance(h, y, delta).unwrap(),
        };
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[test]
fn ten_thousand_instances_match_brute_force() {
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..10_000 {
        let dim = r.random_range(1..5);
        let n = r.random_range(1..=64);
        // Coarse lattice coordinates make exact ties common.
        let lattice = r.random_bool(0.3);
        let coord = |r: &mut ChaCha8Rng| {
            if lattice {
                f64::from(r.random_range(-3..=3)) * 0.5
            } else {
                r.random_range(-5.0..5.0)
            }
        };
        let hyps = PointSet::new(dim, (0..n * dim).map(|_| coord(&mut r)).collect()).unwrap();
        let y: Vec<f64> = (0..dim).map(|_| coord(&mut r)).collect();
        let metric = if r.random_bool(0.5) {
            WtaMetric::SquaredEuclidean
        } else {
            WtaMetric::LogDistance { delta: r.random_range(1e-4..1.0) }
        };
        let got = wta_evaluate(&hyps, &y, metric, 0.0).unwrap();
        let (winner, loss) = brute_force(&hyps, &y, metric);
        assert_eq!(got.winner, winner, "case {case}");
        assert_eq!(got.loss, loss, "case {case}");
    }
}

#[test]
fn small_examples() {
    let hyps = PointSet::from_scalars(&[1.0, 2.0]).unwrap();
    let r = wta_evaluate(&hyps, &[1.2], WtaMetric::SquaredEuclidean, 0.0).unwrap();
    assert_eq!(r.winner, 0);
    assert!((r.loss - 0.04).abs() < 1e-12);
    assert_eq!(r.weights, vec![1.0, 0.0]);

    let r = wta_evaluate(&hyps, &[1.5], WtaMetric::SquaredEuclidean, 0.1).unwrap();
    assert_eq!(r.winner, 0);
    assert_eq!(r.weights, vec![0.9, 0.1]);

    let one = PointSet::from_scalars(&[3.0]).unwrap();
    assert_eq!(wta_evaluate(&one, &[0.0], WtaMetric::SquaredEuclidean, 0.5).unwrap().weights, vec![1.0]);
}

#[test]
fn rejects_bad_inputs() {
    let hyps = PointSet::from_scalars(&[1.0, 2.0]).unwrap();
    let empty = PointSet::empty(1).unwrap();
    assert_eq!(wta_evaluate(&empty, &[0.0], WtaMetric::SquaredEuclidean, 0.0).unwrap_err(), Error::EmptyHypotheses);
    assert!(matches!(
        wta_evaluate(&hyps, &[0.0, 1.0], WtaMetric::SquaredEuclidean, 0.0),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(wta_evaluate(&hyps, &[0.0], WtaMetric::SquaredEuclidean, 1.0).is_err());
    assert!(wta_evaluate(&hyps, &[0.0], WtaMetric::LogDistance { delta: 0.0 }, 0.0).is_err());
}

proptest! {
    #[test]
    fn weights_sum_to_one(n in 1usize..40, eps in 0.0f64..0.99, seed in 0u64..1000) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let hyps = PointSet::new(2, (0..2 * n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let res = wta_evaluate(&hyps, &[0.1, -0.2], WtaMetric::SquaredEuclidean, eps).unwrap();
        prop_assert!((res.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(res.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn both_metrics_pick_the_same_winner(seed in 0u64..100_000, delta in 1e-4f64..2.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let hyps = PointSet::new(3, (0..30).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let y = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let a = wta_evaluate(&hyps, &y, WtaMetric::SquaredEuclidean, 0.0).unwrap();
        let b = wta_evaluate(&hyps, &y, WtaMetric::LogDistance { delta }, 0.0).unwrap();
        prop_assert_eq!(a.winner, b.winner);
    }

    #[test]
    fn squared_gradient_points_away_from_label(seed in 0u64..100_000) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let hyps = PointSet::new(2, (0..8).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let y = [0.3, 0.4];
        let res = wta_evaluate(&hyps, &y, WtaMetric::SquaredEuclidean, 0.0).unwrap();
        let g = wta_gradients(&hyps, &y, WtaMetric::SquaredEuclidean, 0.0).unwrap();
        let h = hyps.point(res.winner);
        for k in 0..2 {
            prop_assert!((g.point(res.winner)[k] - 2.0 * (h[k] - y[k])).abs() < 1e-12);
        }
    }
}
