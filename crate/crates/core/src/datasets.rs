//! Seedable generators for the synthetic distributions used in experiments.
//!
//! * Call center: `x ~ U[6, 20]` (hour of day), `y | x ~ Erlang(λ(x), 5)` with
//!   `λ(x) = λ₀ (1 + α sin(π (x − 6) / 14))`.
//! * Gaussian mixtures in any dimension, sampled through Cholesky factors.
//! * A conditional surrogate with 4-D features and bimodal 2-D labels; see
//!   [`surrogate_mixture`] for the exact formula.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::points::{Dataset, PointSet};
use crate::rng::{self, open_unit};

/// Number of exponential stages in the call-center waiting time.
pub const ERLANG_SHAPE: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CallCenterModel {
    /// Base call rate λ₀ (calls per hour).
    pub lambda0: f64,
    /// Modulation depth α in `[0, 1)`.
    pub alpha: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for CallCenterModel {
    fn default() -> Self {
        CallCenterModel {
            lambda0: 1.0,
            alpha: 0.5,
            x_min: 6.0,
            x_max: 20.0,
        }
    }
}

impl CallCenterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0) || !(0.0..1.0).contains(&self.alpha) || !(self.x_max > self.x_min) {
            return Err(invalid("call-center model needs lambda0 > 0, alpha in [0, 1), x_min < x_max"));
        }
        Ok(())
    }

    /// Arrival rate λ(x).
    pub fn rate(&self, x: f64) -> f64 {
        let phase = PI * (x - self.x_min) / (self.x_max - self.x_min);
        self.lambda0 * (1.0 + self.alpha * libm::sin(phase))
    }

    /// `E[y | x] = k / λ(x)`.
    pub fn mean(&self, x: f64) -> f64 {
        f64::from(ERLANG_SHAPE) / self.rate(x)
    }

    /// `Var[y | x] = k / λ(x)²`.
    pub fn variance(&self, x: f64) -> f64 {
        let r = self.rate(x);
        f64::from(ERLANG_SHAPE) / (r * r)
    }

    /// One Erlang draw as a sum of `k` inverse-CDF exponentials.
    pub fn sample_y<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let rate = self.rate(x);
        (0..ERLANG_SHAPE).map(|_| -libm::log(open_unit(rng))).sum::<f64>() / rate
    }
}

pub fn sample_call_center(model: &CallCenterModel, k: usize, seed: u64) -> Result<Dataset> {
    model.validate()?;
    if k == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let mut r = rng::stream(seed, "call-center");
    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for _ in 0..k {
        let x = model.x_min + (model.x_max - model.x_min) * r.random::<f64>();
        xs.push(x);
        ys.push(model.sample_y(x, &mut r));
    }
    Dataset::new(PointSet::from_raw(1, xs), PointSet::from_raw(1, ys))
}

/// `λ^k y^{k−1} e^{−λy} / (k−1)!`; zero for negative `y`.
pub fn erlang_pdf(y: f64, lambda: f64, k: u32) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    if y == 0.0 {
        return if k == 1 { lambda } else { 0.0 };
    }
    let km1 = f64::from(k - 1);
    let log_fact: f64 = (1..k).map(|j| libm::log(f64::from(j))).sum();
    libm::exp(f64::from(k) * libm::log(lambda) + km1 * libm::log(y) - lambda * y - log_fact)
}

/// `1 − e^{−λy} Σ_{j<k} (λy)^j / j!`.
pub fn erlang_cdf(y: f64, lambda: f64, k: u32) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let t = lambda * y;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= t / f64::from(j);
        sum += term;
    }
    1.0 - libm::exp(-t) * sum
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `d × d` covariance.
    pub covariance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureModel {
    dim: usize,
    components: Vec<MixtureComponent>,
    factors: Vec<Vec<f64>>,
}

impl MixtureModel {
    /// Weights must be nonnegative and sum to one; covariances must be SPD.
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components.first().ok_or(Error::Empty("mixture components"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(invalid("mixture dimension must be at least 1"));
        }
        let mut total = 0.0;
        let mut factors = Vec::with_capacity(components.len());
        for c in &components {
            check_dim(dim, c.mean.len())?;
            if !(c.weight >= 0.0) || !c.weight.is_finite() {
                return Err(invalid("mixture weights must be nonnegative"));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::NonFiniteInput("mixture mean"));
            }
            total += c.weight;
            factors.push(linalg::cholesky(&c.covariance, dim)?);
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("mixture weights must sum to 1"));
        }
        Ok(MixtureModel {
            dim,
            components,
            factors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Mixture mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (a, b) in m.iter_mut().zip(&c.mean) {
                *a += c.weight * b;
            }
        }
        m
    }

    /// Mixture covariance (row-major).
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mu = self.mean();
        let mut cov = vec![0.0; d * d];
        for c in &self.components {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] +=
                        c.weight * (c.covariance[i * d + j] + (c.mean[i] - mu[i]) * (c.mean[j] - mu[j]));
                }
            }
        }
        cov
    }

    pub fn log_pdf(&self, y: &[f64]) -> f64 {
        let d = self.dim;
        let mut z = vec![0.0; d];
        let mut terms = Vec::with_capacity(self.components.len());
        for (c, l) in self.components.iter().zip(&self.factors) {
            if c.weight == 0.0 {
                continue;
            }
            for ((zi, yi), mi) in z.iter_mut().zip(y).zip(&c.mean) {
                *zi = yi - mi;
            }
            linalg::forward_substitute(l, d, &mut z);
            let maha: f64 = z.iter().map(|v| v * v).sum();
            terms.push(
                libm::log(c.weight) - 0.5 * (d as f64 * libm::log(2.0 * PI) + linalg::log_det(l, d) + maha),
            );
        }
        log_sum_exp(&terms)
    }

    pub fn pdf(&self, y: &[f64]) -> f64 {
        libm::exp(self.log_pdf(y))
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc && c.weight > 0.0 {
                pick = i;
                break;
            }
        }
        // Guard against rounding leaving `pick` on a zero-weight tail.
        while self.components[pick].weight == 0.0 && pick > 0 {
            pick -= 1;
        }
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        linalg::lower_mul(&self.factors[pick], self.dim, z, out);
        for (o, m) in out.iter_mut().zip(&self.components[pick].mean) {
            *o += m;
        }
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + libm::log(terms.iter().map(|t| libm::exp(t - max)).sum::<f64>())
}

pub fn sample_mixture(model: &MixtureModel, k: usize, seed: u64) -> Result<PointSet> {
    if k == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let d = model.dim;
    let mut r = rng::stream(seed, "mixture");
    let mut coords = vec![0.0; k * d];
    let mut z = vec![0.0; d];
    for out in coords.chunks_exact_mut(d) {
        model.sample_into(&mut r, &mut z, out);
    }
    Ok(PointSet::from_raw(d, coords))
}

/// One-dimensional standard normal as a single-component mixture.
pub fn standard_normal_1d() -> MixtureModel {
    MixtureModel::new(vec![MixtureComponent {
        weight: 1.0,
        mean: vec![0.0],
        covariance: vec![1.0],
    }])
    .expect("valid by construction")
}

/// Three-component 2-D mixture with unequal weights and anisotropic
/// covariances, used for unconditional placement experiments.
pub fn fig1_mixture() -> MixtureModel {
    MixtureModel::new(vec![
        MixtureComponent {
            weight: 0.5,
            mean: vec![0.0, 0.0],
            covariance: vec![1.0, 0.6, 0.6, 0.8],
        },
        MixtureComponent {
            weight: 0.3,
            mean: vec![3.0, 2.0],
            covariance: vec![0.3, 0.0, 0.0, 1.2],
        },
        MixtureComponent {
            weight: 0.2,
            mean: vec![-2.5, 2.5],
            covariance: vec![0.6, -0.3, -0.3, 0.4],
        },
    ])
    .expect("valid by construction")
}

/// Feature dimension of the conditional surrogate.
pub const SURROGATE_FEATURES: usize = 4;

/// Conditional label law of the surrogate at `x ∈ [−1, 1]⁴`:
///
/// ```text
/// c  = (0.5 x0, 0.5 x1)            s = 1 + 0.5 x0
/// θ  = (π/2) x3                    u = (cos θ, sin θ)
/// σ  = 0.25 + 0.05 x1              w = 1 / (1 + e^{−1.5 x2})
/// y ~ w · N(c + s u, σ² I) + (1 − w) · N(c − s u, σ² diag(1, 0.5))
/// ```
pub fn surrogate_mixture(x: &[f64]) -> Result<MixtureModel> {
    check_dim(SURROGATE_FEATURES, x.len())?;
    let c = [0.5 * x[0], 0.5 * x[1]];
    let s = 1.0 + 0.5 * x[0];
    let theta = 0.5 * PI * x[3];
    let u = [libm::cos(theta), libm::sin(theta)];
    let sigma = 0.25 + 0.05 * x[1];
    let w = 1.0 / (1.0 + libm::exp(-1.5 * x[2]));
    let v = sigma * sigma;
    MixtureModel::new(vec![
        MixtureComponent {
            weight: w,
            mean: vec![c[0] + s * u[0], c[1] + s * u[1]],
            covariance: vec![v, 0.0, 0.0, v],
        },
        MixtureComponent {
            weight: 1.0 - w,
            mean: vec![c[0] - s * u[0], c[1] - s * u[1]],
            covariance: vec![v, 0.0, 0.0, 0.5 * v],
        },
    ])
}

pub fn sample_conditional_surrogate(k: usize, seed: u64) -> Result<Dataset> {
    if k == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let mut r = rng::stream(seed, "conditional-surrogate");
    let mut xs = vec![0.0; k * SURROGATE_FEATURES];
    let mut ys = vec![0.0; k * 2];
    let mut z = [0.0; 2];
    for (x, y) in xs.chunks_exact_mut(SURROGATE_FEATURES).zip(ys.chunks_exact_mut(2)) {
        for v in x.iter_mut() {
            *v = r.random_range(-1.0..1.0);
        }
        surrogate_mixture(x)?.sample_into(&mut r, &mut z, y);
    }
    Dataset::new(
        PointSet::from_raw(SURROGATE_FEATURES, xs),
        PointSet::from_raw(2, ys),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_peaks_mid_interval() {
        let m = CallCenterModel::default();
        assert!((m.rate(13.0) - 1.5).abs() < 1e-12);
        assert!((m.mean(13.0) - 5.0 / 1.5).abs() < 1e-12);
        for i in 0..=140 {
            let x = 6.0 + 0.1 * i as f64;
            assert!(m.rate(x) > 0.0 && m.rate(x) <= m.rate(13.0) + 1e-12);
        }
    }

    #[test]
    fn erlang_pdf_basics() {
        assert_eq!(erlang_pdf(0.0, 2.5, 1), 2.5);
        assert_eq!(erlang_pdf(-1.0, 2.5, 5), 0.0);
        let lambda = 1.7;
        let mode = 4.0 / lambda;
        assert!(erlang_pdf(mode, lambda, 5) > erlang_pdf(mode - 0.01, lambda, 5));
        assert!(erlang_pdf(mode, lambda, 5) > erlang_pdf(mode + 0.01, lambda, 5));
    }

    #[test]
    fn call_center_rejects_zero_count() {
        assert!(sample_call_center(&CallCenterModel::default(), 0, 1).is_err());
        let d = sample_call_center(&CallCenterModel::default(), 1000, 1).unwrap();
        assert!(d.labels.as_flat().iter().all(|&y| y > 0.0));
        assert!(d.features.as_flat().iter().all(|&x| (6.0..20.0).contains(&x)));
    }

    #[test]
    fn mixture_validation() {
        let bad_cov = MixtureComponent {
            weight: 1.0,
            mean: vec![0.0, 0.0],
            covariance: vec![1.0, 2.0, 2.0, 1.0],
        };
        assert_eq!(MixtureModel::new(vec![bad_cov]), Err(Error::NotPositiveDefinite));
        let half = MixtureComponent {
            weight: 0.5,
            mean: vec![0.0],
            covariance: vec![1.0],
        };
        assert!(MixtureModel::new(vec![half]).is_err());
    }

    #[test]
    fn zero_weight_component_never_drawn() {
        let m = MixtureModel::new(vec![
            MixtureComponent {
                weight: 1.0,
                mean: vec![0.0],
                covariance: vec![1.0],
            },
            MixtureComponent {
                weight: 0.0,
                mean: vec![1000.0],
                covariance: vec![1.0],
            },
        ])
        .unwrap();
        let s = sample_mixture(&m, 20_000, 4).unwrap();
        assert!(s.as_flat().iter().all(|v| v.abs() < 100.0));
    }

    #[test]
    fn log_pdf_of_standard_normal() {
        let m = standard_normal_1d();
        assert!((m.log_pdf(&[0.0]) + 0.5 * libm::log(2.0 * PI)).abs() < 1e-14);
    }
}
