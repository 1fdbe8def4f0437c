//! Unconditional hypothesis placement: `N` points that directly minimize the
//! mean WTA loss over a fixed sample set, with no network in between.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};

use crate::error::{check_dim, invalid, Error, Result};
use crate::metrics::WtaMetric;
use crate::optim::{OptimizerState, TrainConfig};
use crate::points::{HypothesisSet, PointSet};
use crate::rng;
use crate::wta::nearest;

/// Mean WTA loss of `hyps` over `samples` (plain minimum, no relaxation).
pub fn mean_wta_loss(samples: &PointSet, hyps: &HypothesisSet, metric: WtaMetric) -> Result<f64> {
    if hyps.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    check_dim(hyps.dim(), samples.dim())?;
    metric.validate()?;
    let total: f64 = samples
        .iter()
        .map(|y| metric.from_squared_norm(nearest(hyps.as_flat(), hyps.dim(), y).1))
        .sum();
    Ok(total / samples.len() as f64)
}

/// Places `n` hypotheses by mini-batch gradient descent on the mean WTA loss,
/// starting from `n` distinct random samples.
pub fn fit_hypotheses(
    samples: &PointSet,
    n: usize,
    metric: WtaMetric,
    cfg: &TrainConfig,
) -> Result<HypothesisSet> {
    cfg.validate()?;
    metric.validate()?;
    if n == 0 {
        return Err(invalid("number of hypotheses must be at least 1"));
    }
    if samples.len() < n {
        return Err(Error::TooFewSamples {
            requested: n,
            available: samples.len(),
        });
    }
    let dim = samples.dim();

    // Work in centred, isotropically scaled coordinates.
    let offset = samples.mean();
    let var = samples.variance();
    let scale = match libm::sqrt(var.iter().sum::<f64>() / dim as f64) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let mut data = samples.clone();
    for p in data.as_flat_mut().chunks_exact_mut(dim) {
        for (v, o) in p.iter_mut().zip(&offset) {
            *v = (*v - o) / scale;
        }
    }
    let metric = metric.rescaled(scale);

    let mut init = rng::stream(cfg.seed, "quantizer-init");
    let picks = index::sample(&mut init, data.len(), n).into_vec();
    let mut hyps = data.select(&picks).into_flat();

    let mut opt = OptimizerState::new(cfg.optimizer, hyps.len());
    let mut grads = vec![0.0; hyps.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle = rng::stream(cfg.seed, "quantizer-shuffle");
    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs).max(1);
    let mut step = 0usize;
    let off_weight_denominator = (n.max(2) - 1) as f64;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let lr = cfg.learning_rate_at(epoch);
        for batch in order.chunks(cfg.batch_size) {
            let epsilon = if n > 1 {
                cfg.epsilon.at(step as f64 / total_steps as f64)
            } else {
                0.0
            };
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &k in batch {
                let y = data.point(k);
                let (winner, _) = nearest(&hyps, dim, y);
                if epsilon == 0.0 {
                    let h = &hyps[winner * dim..(winner + 1) * dim];
                    metric.add_gradient(h, y, 1.0, &mut grads[winner * dim..(winner + 1) * dim]);
                } else {
                    let other = epsilon / off_weight_denominator;
                    for (i, (h, g)) in hyps.chunks_exact(dim).zip(grads.chunks_exact_mut(dim)).enumerate() {
                        let w = if i == winner { 1.0 - epsilon } else { other };
                        metric.add_gradient(h, y, w, g);
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= inv);
            opt.step(&mut hyps, &grads, lr);
            step += 1;
        }
        if hyps.iter().any(|h| !h.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
    }

    for p in hyps.chunks_exact_mut(dim) {
        for (v, o) in p.iter_mut().zip(&offset) {
            *v = o + scale * *v;
        }
    }
    Ok(PointSet::from_raw(dim, hyps))
}

/// Batch alternation: assign every sample to its nearest hypothesis, then move
/// each hypothesis to reduce its cell's summed distance.
///
/// Squared Euclidean moves to the cell mean (Lloyd). The log distance takes
/// one majorize-minimize step: since `ln(√t + δ)` is concave in `t = r²`, the
/// weighted mean with weights `1 / (r (r + δ))` never increases the cell cost.
/// A hypothesis whose cell is empty is re-seeded at the sample lying farthest
/// from its current winner.
pub fn lloyd_refine(
    samples: &PointSet,
    hyps: &HypothesisSet,
    metric: WtaMetric,
    iterations: usize,
) -> Result<HypothesisSet> {
    if hyps.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    check_dim(hyps.dim(), samples.dim())?;
    metric.validate()?;
    let dim = hyps.dim();
    let n = hyps.len();
    let mut current = hyps.clone();
    let mut assign = vec![0usize; samples.len()];
    let mut dist = vec![0.0f64; samples.len()];

    for _ in 0..iterations {
        for (k, y) in samples.iter().enumerate() {
            let (w, d) = nearest(current.as_flat(), dim, y);
            assign[k] = w;
            dist[k] = d;
        }
        let mut counts = vec![0usize; n];
        assign.iter().for_each(|&w| counts[w] += 1);

        // Repair empty cells from the worst-served samples.
        let empty: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
        let mut reseeded = vec![false; n];
        if !empty.is_empty() {
            let mut by_distance: Vec<usize> = (0..samples.len()).collect();
            by_distance.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
            for (&cell, &k) in empty.iter().zip(&by_distance) {
                current.point_mut(cell).copy_from_slice(samples.point(k));
                reseeded[cell] = true;
            }
        }

        let mut num = vec![0.0; n * dim];
        let mut den = vec![0.0; n];
        for (k, y) in samples.iter().enumerate() {
            let i = assign[k];
            if reseeded[i] {
                continue;
            }
            let w = match metric {
                WtaMetric::SquaredEuclidean => 1.0,
                WtaMetric::LogDistance { delta } => {
                    let r = libm::sqrt(dist[k]).max(1e-6 * delta);
                    1.0 / (r * (r + delta))
                }
            };
            den[i] += w;
            for (a, c) in num[i * dim..(i + 1) * dim].iter_mut().zip(y) {
                *a += w * c;
            }
        }
        for i in 0..n {
            if reseeded[i] || den[i] == 0.0 {
                continue;
            }
            for (h, a) in current.point_mut(i).iter_mut().zip(&num[i * dim..(i + 1) * dim]) {
                *h = a / den[i];
            }
        }
    }
    Ok(current)
}

/// Winning hypothesis index per sample, by Euclidean distance.
pub fn assign(samples: &PointSet, hyps: &HypothesisSet) -> Result<Vec<usize>> {
    if hyps.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    check_dim(hyps.dim(), samples.dim())?;
    Ok(samples.iter().map(|y| nearest(hyps.as_flat(), hyps.dim(), y).0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_many_hypotheses_is_an_error() {
        let s = PointSet::from_scalars(&[0.0, 1.0]).unwrap();
        let cfg = TrainConfig::quantizer(WtaMetric::SquaredEuclidean);
        assert_eq!(
            fit_hypotheses(&s, 3, WtaMetric::SquaredEuclidean, &cfg),
            Err(Error::TooFewSamples {
                requested: 3,
                available: 2
            })
        );
    }

    #[test]
    fn identical_samples_pin_every_hypothesis() {
        let s = PointSet::new(2, [0.7, -1.3].repeat(50)).unwrap();
        for metric in [WtaMetric::SquaredEuclidean, WtaMetric::LogDistance { delta: 1e-3 }] {
            let cfg = TrainConfig::quantizer(metric).with_epochs(5);
            let h = fit_hypotheses(&s, 4, metric, &cfg).unwrap();
            for p in h.iter() {
                assert!((p[0] - 0.7).abs() < 1e-3 && (p[1] + 1.3).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn lloyd_symmetric_pair() {
        let s = PointSet::from_scalars(&[-1.0, 1.0]).unwrap();
        let init = PointSet::from_scalars(&[-0.9, 0.9]).unwrap();
        let h = lloyd_refine(&s, &init, WtaMetric::SquaredEuclidean, 3).unwrap();
        assert_eq!(h.as_flat(), &[-1.0, 1.0]);
    }

    #[test]
    fn lloyd_reseeds_empty_cells() {
        let s = PointSet::from_scalars(&[0.0, 0.1, 5.0]).unwrap();
        let init = PointSet::from_scalars(&[0.05, 100.0]).unwrap();
        let h = lloyd_refine(&s, &init, WtaMetric::SquaredEuclidean, 2).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.point(1), &[5.0]);
    }
}
