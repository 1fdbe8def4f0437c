//! Winner-takes-all loss over a hypothesis set.
//!
//! The loss for one observation is the distance to the closest hypothesis.
//! During training the gradient can be relaxed: the winner gets weight
//! `1 − ε` and every other hypothesis `ε / (N − 1)`, which keeps hypotheses
//! that never win from freezing. With `ε = 0` the loss is the plain minimum.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::metrics::{sq_unchecked, WtaMetric};
use crate::points::{HypothesisSet, PointSet};

#[derive(Clone, Debug, PartialEq)]
pub struct WtaResult {
    /// Distance from the winning hypothesis to the observation.
    pub loss: f64,
    /// Lowest index attaining the minimum distance.
    pub winner: usize,
    /// Relaxed per-hypothesis weights, summing to one.
    pub weights: Vec<f64>,
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(invalid("epsilon must lie in [0, 1)"))
    }
}

/// Relaxed weights for `n` hypotheses. A single hypothesis always has weight 1.
pub fn wta_weights(n: usize, winner: usize, epsilon: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let mut w = vec![epsilon / (n - 1) as f64; n];
    w[winner] = 1.0 - epsilon;
    w
}

fn check_inputs(hyps: &HypothesisSet, y: &[f64], metric: &WtaMetric, epsilon: f64) -> Result<()> {
    if hyps.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    check_dim(hyps.dim(), y.len())?;
    metric.validate()?;
    check_epsilon(epsilon)
}

pub fn wta_evaluate(
    hyps: &HypothesisSet,
    y: &[f64],
    metric: WtaMetric,
    epsilon: f64,
) -> Result<WtaResult> {
    check_inputs(hyps, y, &metric, epsilon)?;
    let mut winner = 0;
    let mut loss = f64::INFINITY;
    for (i, h) in hyps.iter().enumerate() {
        let d = metric.from_squared_norm(sq_unchecked(h, y));
        if d < loss {
            loss = d;
            winner = i;
        }
    }
    Ok(WtaResult {
        loss,
        winner,
        weights: wta_weights(hyps.len(), winner, epsilon),
    })
}

/// Gradient of `Σ_i w_i d(y_i, y)` with respect to every hypothesis, with the
/// weights frozen at the winner found by [`wta_evaluate`].
pub fn wta_gradients(
    hyps: &HypothesisSet,
    y: &[f64],
    metric: WtaMetric,
    epsilon: f64,
) -> Result<PointSet> {
    let res = wta_evaluate(hyps, y, metric, epsilon)?;
    let mut grads = vec![0.0; hyps.as_flat().len()];
    accumulate_gradients(hyps.as_flat(), hyps.dim(), y, metric, &res.weights, &mut grads);
    Ok(PointSet::from_raw(hyps.dim(), grads))
}

/// `Σ_i w_i d(y_i, y)`.
pub fn relaxed_loss(hyps: &HypothesisSet, y: &[f64], metric: WtaMetric, weights: &[f64]) -> Result<f64> {
    check_dim(hyps.dim(), y.len())?;
    check_dim(hyps.len(), weights.len())?;
    Ok(hyps
        .iter()
        .zip(weights)
        .map(|(h, w)| w * metric.from_squared_norm(sq_unchecked(h, y)))
        .sum())
}

/// `grads[i] += w_i ∇ d(y_i, y)` over a flat hypothesis buffer. Zero weights
/// are skipped.
pub(crate) fn accumulate_gradients(
    flat: &[f64],
    dim: usize,
    y: &[f64],
    metric: WtaMetric,
    weights: &[f64],
    grads: &mut [f64],
) {
    for ((h, g), &w) in flat.chunks_exact(dim).zip(grads.chunks_exact_mut(dim)).zip(weights) {
        if w != 0.0 {
            metric.add_gradient(h, y, w, g);
        }
    }
}

/// Index of the nearest row of `flat` in Euclidean distance (lowest index on
/// ties) and its squared distance.
#[inline]
pub(crate) fn nearest(flat: &[f64], dim: usize, y: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, h) in flat.chunks_exact(dim).enumerate() {
        let d = sq_unchecked(h, y);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
