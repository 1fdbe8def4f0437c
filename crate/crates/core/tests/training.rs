use dpmhp_core::datasets::{sample_call_center, CallCenterModel};
use dpmhp_core::{train, Activation, Dataset, NetworkSpec, PointSet, StepDecay, TrainConfig, WtaMetric};

#[test]
fn single_hypothesis_learns_a_constant_label() {
    let x: Vec<f64> = (0..512).map(|i| f64::from(i) / 512.0).collect();
    let data = Dataset::new(PointSet::from_scalars(&x).unwrap(), PointSet::from_scalars(&vec![3.5; 512]).unwrap()).unwrap();
    let spec = NetworkSpec::new(1, vec![8], Activation::Tanh, 1, 1).unwrap();
    let mut cfg = TrainConfig::mhp(WtaMetric::SquaredEuclidean).with_epochs(200);
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 32;
    cfg.lr_decay = Some(StepDecay { factor: 0.5, every_epochs: 40 });
    let out = train(&spec, &data, &cfg).unwrap();
    for v in [0.0, 0.3, 0.9] {
        let got = out.model.forward(&[v]).unwrap().point(0)[0];
        assert!((got - 3.5).abs() < 1e-3, "{got}");
    }
}

#[test]
fn call_center_loss_decreases_for_both_metrics() {
    let data = sample_call_center(&CallCenterModel::default(), 5_000, 3).unwrap();
    let spec = NetworkSpec::new(1, vec![16, 16], Activation::Tanh, 10, 1).unwrap();
    for metric in [WtaMetric::SquaredEuclidean, WtaMetric::LogDistance { delta: 0.02 }] {
        let mut cfg = TrainConfig::mhp(metric).with_epochs(15);
        cfg.lr_decay = Some(StepDecay { factor: 0.5, every_epochs: 5 });
        let out = train(&spec, &data, &cfg).unwrap();
        let h = &out.history;
        assert_eq!(h.len(), 15);
        assert!(h[h.len() - 1] < h[0], "{}: {h:?}", metric.name());
        let alive = out.final_epoch_wins.iter().filter(|&&w| w > 0).count();
        assert!(alive >= 9, "{}: only {alive} hypotheses win", metric.name());
        assert_eq!(out.final_epoch_wins.iter().sum::<u64>(), 5_000);
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = sample_call_center(&CallCenterModel::default(), 1_000, 4).unwrap();
    let spec = NetworkSpec::new(1, vec![8], Activation::Relu, 4, 1).unwrap();
    let cfg = TrainConfig::mhp(WtaMetric::LogDistance { delta: 0.01 }).with_epochs(3).with_seed(9);
    let a = train(&spec, &data, &cfg).unwrap();
    let b = train(&spec, &data, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(&spec, &data, &cfg.clone().with_seed(10)).unwrap();
    assert_ne!(a.model.params, c.model.params);
}

#[test]
fn model_maps_back_to_label_units() {
    // Labels far from the origin with a large spread: the fitted model must
    // report hypotheses in the original units.
    let x: Vec<f64> = (0..400).map(|i| f64::from(i % 2)).collect();
    let y: Vec<f64> = x.iter().map(|v| 1000.0 + 50.0 * v).collect();
    let data = Dataset::new(PointSet::from_scalars(&x).unwrap(), PointSet::from_scalars(&y).unwrap()).unwrap();
    let spec = NetworkSpec::new(1, vec![8], Activation::Tanh, 1, 1).unwrap();
    let mut cfg = TrainConfig::mhp(WtaMetric::SquaredEuclidean).with_epochs(150);
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 32;
    cfg.lr_decay = Some(StepDecay { factor: 0.5, every_epochs: 40 });
    let out = train(&spec, &data, &cfg).unwrap();
    assert!((out.model.forward(&[0.0]).unwrap().point(0)[0] - 1000.0).abs() < 0.5);
    assert!((out.model.forward(&[1.0]).unwrap().point(0)[0] - 1050.0).abs() < 0.5);
}
