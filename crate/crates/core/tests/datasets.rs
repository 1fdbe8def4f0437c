use dpmhp_core::datasets::{
    erlang_cdf, erlang_pdf, fig1_mixture, sample_call_center, sample_conditional_surrogate, sample_mixture,
    surrogate_mixture, CallCenterModel, ERLANG_SHAPE, SURROGATE_FEATURES,
};
use statrs::distribution::{ContinuousCDF, Continuous, Gamma};

#[test]
fn erlang_matches_gamma_reference() {
    for lambda in [0.5, 1.0, 1.5, 3.0] {
        let g = Gamma::new(f64::from(ERLANG_SHAPE), lambda).unwrap();
        for i in 1..200 {
            let y = f64::from(i) * 0.1;
            assert!((erlang_pdf(y, lambda, ERLANG_SHAPE) - g.pdf(y)).abs() < 1e-12);
            assert!((erlang_cdf(y, lambda, ERLANG_SHAPE) - g.cdf(y)).abs() < 1e-12);
        }
    }
}

#[test]
fn erlang_pdf_integrates_to_one() {
    let h = 1e-3;
    let total: f64 = (0..60_000)
        .map(|i| {
            let a = f64::from(i) * h;
            0.5 * h * (erlang_pdf(a, 1.2, 5) + erlang_pdf(a + h, 1.2, 5))
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-6);
}

#[test]
fn call_center_samples_follow_erlang() {
    let model = CallCenterModel::default();
    assert!((model.mean(13.0) - 5.0 / 1.5).abs() < 1e-12);
    assert!((model.variance(6.0) - 5.0).abs() < 1e-12);

    // Conditional law at a fixed x: KS against the reference CDF.
    let x = 9.0;
    let lambda = model.rate(x);
    let mut r = dpmhp_core::rng::stream(3, "ks-check");
    let mut ys: Vec<f64> = (0..20_000).map(|_| model.sample_y(x, &mut r)).collect();
    ys.sort_by(f64::total_cmp);
    let g = Gamma::new(5.0, lambda).unwrap();
    let n = ys.len() as f64;
    let ks = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| ((i + 1) as f64 / n - g.cdf(y)).max(g.cdf(y) - i as f64 / n))
        .fold(0.0, f64::max);
    // 99.9% DKW bound: sqrt(ln(2 / 0.001) / (2n))
    assert!(ks < (2000f64.ln() / (2.0 * n)).sqrt(), "ks {ks}");

    let data = sample_call_center(&model, 50_000, 8).unwrap();
    assert!(data.features.iter().all(|x| (6.0..20.0).contains(&x[0])));
    assert!(data.labels.iter().all(|y| y[0] > 0.0));
    // E[y] = E_x[5 / λ(x)]; integrate the truth on a fine grid.
    let truth: f64 = (0..14_000).map(|i| model.mean(6.0 + (f64::from(i) + 0.5) * 1e-3)).sum::<f64>() / 14_000.0;
    assert!((data.labels.mean()[0] - truth).abs() < 0.03, "{} vs {truth}", data.labels.mean()[0]);
}

#[test]
fn generators_are_deterministic_per_seed() {
    let m = CallCenterModel::default();
    assert_eq!(sample_call_center(&m, 100, 4).unwrap(), sample_call_center(&m, 100, 4).unwrap());
    assert_ne!(sample_call_center(&m, 100, 4).unwrap(), sample_call_center(&m, 100, 5).unwrap());
    assert_eq!(sample_conditional_surrogate(50, 1).unwrap(), sample_conditional_surrogate(50, 1).unwrap());
    assert!(sample_call_center(&m, 0, 1).is_err());
}

#[test]
fn mixture_sample_moments_match_closed_form() {
    let m = fig1_mixture();
    let s = sample_mixture(&m, 200_000, 9).unwrap();
    let mean = m.mean();
    let cov = m.covariance();
    let emp_mean = s.mean();
    for k in 0..2 {
        assert!((emp_mean[k] - mean[k]).abs() < 0.02, "mean {k}");
    }
    let mut emp = [0.0; 4];
    for p in s.iter() {
        let d = [p[0] - emp_mean[0], p[1] - emp_mean[1]];
        for a in 0..2 {
            for b in 0..2 {
                emp[2 * a + b] += d[a] * d[b];
            }
        }
    }
    for (e, c) in emp.iter().zip(&cov) {
        assert!((e / s.len() as f64 - c).abs() < 0.05, "{e} vs {c}");
    }
}

#[test]
fn mixture_pdf_integrates_to_one() {
    let m = fig1_mixture();
    let h = 0.05;
    let mut total = 0.0;
    for i in 0..400 {
        for j in 0..400 {
            let y = [-10.0 + (f64::from(i) + 0.5) * h, -8.0 + (f64::from(j) + 0.5) * h];
            total += m.pdf(&y) * h * h;
        }
    }
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn surrogate_is_bimodal_and_input_dependent() {
    assert!(surrogate_mixture(&[0.0; 3]).is_err());
    let a = surrogate_mixture(&[0.0; SURROGATE_FEATURES]).unwrap();
    assert_eq!(a.components().len(), 2);
    assert!((a.components()[0].weight - 0.5).abs() < 1e-12);
    assert!((a.components()[0].mean[0] - 1.0).abs() < 1e-12);
    assert!((a.components()[1].mean[0] + 1.0).abs() < 1e-12);
    let b = surrogate_mixture(&[1.0, -1.0, 1.0, 1.0]).unwrap();
    assert!(b.components()[0].weight > 0.8);
    assert_ne!(a.mean(), b.mean());

    let d = sample_conditional_surrogate(1_000, 2).unwrap();
    assert_eq!((d.feature_dim(), d.label_dim()), (SURROGATE_FEATURES, 2));
    assert!(d.features.as_flat().iter().all(|v| (-1.0..1.0).contains(v)));
}
