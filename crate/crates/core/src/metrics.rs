//! Distances used inside the winner-takes-all loss and their gradients with
//! respect to the first argument.
//!
//! Both metrics are monotone functions of the Euclidean norm `‖a − b‖`, so
//! they induce the same nearest-hypothesis partition and differ only in how
//! strongly far-away samples pull on their winner.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{check_dim, Error, Result};
use crate::points::PointSet;
use crate::rng;

/// Distance function `d` of the WTA loss.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum WtaMetric {
    /// `‖a − b‖²`
    SquaredEuclidean,
    /// `ln(‖a − b‖ + delta)`
    LogDistance { delta: f64 },
}

impl WtaMetric {
    pub fn log_distance(delta: f64) -> Result<Self> {
        let m = WtaMetric::LogDistance { delta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WtaMetric::SquaredEuclidean => Ok(()),
            WtaMetric::LogDistance { delta } if delta > 0.0 && delta.is_finite() => Ok(()),
            WtaMetric::LogDistance { delta } => Err(Error::InvalidDelta(delta)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WtaMetric::SquaredEuclidean => "l2",
            WtaMetric::LogDistance { .. } => "ldp",
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.validate()?;
        Ok(self.from_squared_norm(squared_distance(a, b)?))
    }

    /// Distance given `‖a − b‖²`.
    #[inline]
    pub fn from_squared_norm(&self, sq: f64) -> f64 {
        match *self {
            WtaMetric::SquaredEuclidean => sq,
            WtaMetric::LogDistance { delta } => libm::log(libm::sqrt(sq) + delta),
        }
    }

    /// `out += scale * ∇_a d(a, b)`. No dimension checks.
    #[inline]
    pub(crate) fn add_gradient(&self, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        match *self {
            WtaMetric::SquaredEuclidean => {
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o += scale * 2.0 * (x - y);
                }
            }
            WtaMetric::LogDistance { delta } => {
                let r = libm::sqrt(sq_unchecked(a, b));
                if r == 0.0 {
                    return;
                }
                let k = scale / (r * (r + delta));
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o += k * (x - y);
                }
            }
        }
    }

    /// The same metric expressed in coordinates divided by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        match *self {
            WtaMetric::SquaredEuclidean => WtaMetric::SquaredEuclidean,
            WtaMetric::LogDistance { delta } => WtaMetric::LogDistance { delta: delta / factor },
        }
    }

    /// Converts a loss measured in coordinates divided by `factor` back to
    /// original units (the inverse of [`WtaMetric::rescaled`]).
    pub fn loss_in_original_units(&self, loss: f64, factor: f64) -> f64 {
        match self {
            WtaMetric::SquaredEuclidean => loss * factor * factor,
            WtaMetric::LogDistance { .. } => loss + libm::log(factor),
        }
    }
}

#[inline]
pub(crate) fn sq_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(sq_unchecked(a, b))
}

pub fn log_distance(a: &[f64], b: &[f64], delta: f64) -> Result<f64> {
    WtaMetric::log_distance(delta)?.distance(a, b)
}

/// Gradient of `metric` with respect to `a`. At `a == b` the log distance is
/// not differentiable and the zero vector is returned.
pub fn metric_gradient(metric: WtaMetric, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_dim(a.len(), b.len())?;
    metric.validate()?;
    let mut g = vec![0.0; a.len()];
    metric.add_gradient(a, b, 1.0, &mut g);
    Ok(g)
}

/// Largest pairwise Euclidean distance among at most 1000 rows of `samples`
/// (a random subsample when there are more).
pub fn estimate_diameter(samples: &PointSet, seed: u64) -> f64 {
    const SUBSAMPLE: usize = 1000;
    let sub = if samples.len() > SUBSAMPLE {
        let mut r = rng::stream(seed, "diameter-subsample");
        let mut idx = index::sample(&mut r, samples.len(), SUBSAMPLE).into_vec();
        idx.sort_unstable();
        samples.select(&idx)
    } else {
        samples.clone()
    };
    let mut best = 0.0f64;
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            best = best.max(sq_unchecked(sub.point(i), sub.point(j)));
        }
    }
    libm::sqrt(best)
}

/// Default `delta` for [`WtaMetric::LogDistance`]: `1e-3` times the estimated
/// data diameter, or `1e-3` when all samples coincide.
pub fn default_delta(samples: &PointSet, seed: u64) -> f64 {
    let d = estimate_diameter(samples, seed);
    if d > 0.0 {
        1e-3 * d
    } else {
        1e-3
    }
}
