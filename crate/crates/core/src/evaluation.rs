//! Quantitative checks on hypothesis sets: Voronoi data shares, test-function
//! moment gaps, conditional moments of a trained call-center model, the
//! density-exponent KS statistic, and negative log-likelihood under a single
//! Gaussian or a Gaussian KDE fitted to the hypotheses.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::datasets::{log_sum_exp, CallCenterModel};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::network::NetworkSpec;
use crate::optim::TrainConfig;
use crate::points::{Dataset, HypothesisSet, PointSet};
use crate::trainer::{train, MhpModel};
use crate::wta::nearest;
use crate::metrics::WtaMetric;

// ---------------------------------------------------------------------------
// Voronoi shares

/// Fraction of samples falling into each hypothesis' Voronoi cell.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShareReport {
    pub counts: Vec<u64>,
    pub shares: Vec<f64>,
    pub max_share: f64,
    pub min_share: f64,
    /// `sample_count · N · Σ_i (share_i − 1/N)²`, Pearson's statistic against
    /// equal shares.
    pub chi_square_vs_uniform: f64,
    pub sample_count: u64,
}

impl ShareReport {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyHypotheses);
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Empty("samples"));
        }
        let n = counts.len() as f64;
        let shares: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let max_share = shares.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_share = shares.iter().copied().fold(f64::INFINITY, f64::min);
        let dev: f64 = shares.iter().map(|s| (s - 1.0 / n) * (s - 1.0 / n)).sum();
        Ok(ShareReport {
            counts,
            shares,
            max_share,
            min_share,
            chi_square_vs_uniform: total as f64 * n * dev,
            sample_count: total,
        })
    }

    pub fn n_hypotheses(&self) -> usize {
        self.shares.len()
    }

    /// Fraction of cells whose share lies in `[lo / N, hi / N]`.
    pub fn fraction_within(&self, lo: f64, hi: f64) -> f64 {
        let n = self.shares.len() as f64;
        let inside = self
            .shares
            .iter()
            .filter(|&&s| s >= lo / n && s <= hi / n)
            .count();
        inside as f64 / n
    }

    /// `max_share / min_share` (infinite when a cell is empty).
    pub fn spread_ratio(&self) -> f64 {
        self.max_share / self.min_share
    }
}

/// Per-hypothesis count of nearest samples (Euclidean, lowest index on ties).
pub fn assignment_counts(hyps: &HypothesisSet, samples: &PointSet) -> Result<Vec<u64>> {
    if hyps.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    check_dim(hyps.dim(), samples.dim())?;
    let mut counts = vec![0u64; hyps.len()];
    for y in samples.iter() {
        counts[nearest(hyps.as_flat(), hyps.dim(), y).0] += 1;
    }
    Ok(counts)
}

pub fn voronoi_shares(hyps: &HypothesisSet, samples: &PointSet) -> Result<ShareReport> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    ShareReport::from_counts(assignment_counts(hyps, samples)?)
}

// ---------------------------------------------------------------------------
// Moment probes

/// Bounded or polynomial test function `b` applied to hypotheses and samples.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum MomentProbe {
    Coordinate { index: usize },
    SecondMoment { index: usize },
    /// Indicator of the axis-aligned box `[lo, hi]`.
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
}

impl MomentProbe {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            MomentProbe::Coordinate { index } | MomentProbe::SecondMoment { index } => {
                if *index < dim {
                    Ok(())
                } else {
                    Err(invalid("probe coordinate out of range"))
                }
            }
            MomentProbe::BoxIndicator { lo, hi } => {
                check_dim(dim, lo.len())?;
                check_dim(dim, hi.len())?;
                if lo.iter().zip(hi).all(|(a, b)| a < b) {
                    Ok(())
                } else {
                    Err(invalid("box needs lo < hi in every coordinate"))
                }
            }
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            MomentProbe::Coordinate { index } => y[*index],
            MomentProbe::SecondMoment { index } => y[*index] * y[*index],
            MomentProbe::BoxIndicator { lo, hi } => {
                let inside = y.iter().zip(lo).zip(hi).all(|((v, a), b)| *v >= *a && *v <= *b);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mean_over(&self, points: &PointSet) -> f64 {
        points.iter().map(|p| self.eval(p)).sum::<f64>() / points.len() as f64
    }
}

/// `| mean_i b(y_i) − mean_k b(ref_k) |`.
pub fn moment_probe_gap(hyps: &HypothesisSet, probe: &MomentProbe, reference: &PointSet) -> Result<f64> {
    if hyps.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    if reference.is_empty() {
        return Err(Error::Empty("reference samples"));
    }
    check_dim(hyps.dim(), reference.dim())?;
    probe.validate(hyps.dim())?;
    Ok((probe.mean_over(hyps) - probe.mean_over(reference)).abs())
}

// ---------------------------------------------------------------------------
// Conditional moments (call center)

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentRow {
    pub x: f64,
    pub hyp_mean: f64,
    pub hyp_var: f64,
    pub true_mean: f64,
    pub true_var: f64,
}

/// Mean and population variance of a 1-D model's hypotheses along `x_grid`,
/// next to the analytic Erlang moments.
pub fn conditional_moment_curve(
    model: &MhpModel,
    x_grid: &[f64],
    analytic: &CallCenterModel,
) -> Result<Vec<MomentRow>> {
    check_dim(1, model.spec().input_dim)?;
    check_dim(1, model.spec().label_dim)?;
    analytic.validate()?;
    x_grid
        .iter()
        .map(|&x| {
            let h = model.forward(&[x])?;
            let mean = h.mean()[0];
            let var = h.variance()[0];
            Ok(MomentRow {
                x,
                hyp_mean: mean,
                hyp_var: var,
                true_mean: analytic.mean(x),
                true_var: analytic.variance(x),
            })
        })
        .collect()
}

/// Mean relative errors `(|hyp_mean − true_mean| / true_mean, |hyp_var − true_var| / true_var)`
/// averaged over the rows.
pub fn moment_curve_errors(rows: &[MomentRow]) -> (f64, f64) {
    let n = rows.len().max(1) as f64;
    let mean = rows.iter().map(|r| (r.hyp_mean - r.true_mean).abs() / r.true_mean).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r.hyp_var - r.true_var).abs() / r.true_var).sum::<f64>() / n;
    (mean, var)
}

// ---------------------------------------------------------------------------
// Density-exponent law

/// Normalized CDF of `density^exponent` on a grid (trapezoid rule), evaluated
/// by linear interpolation of the cumulative integral.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCdf {
    grid: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GridCdf {
    pub fn new(grid: &[f64], density: &[f64], exponent: f64) -> Result<Self> {
        check_dim(grid.len(), density.len())?;
        if grid.len() < 2 {
            return Err(invalid("grid needs at least two points"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid must be strictly increasing"));
        }
        if density.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::NotNormalizable);
        }
        let q: Vec<f64> = density.iter().map(|&p| libm::pow(p, exponent)).collect();
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 1..grid.len() {
            acc += 0.5 * (q[i] + q[i - 1]) * (grid[i] - grid[i - 1]);
            cumulative.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::NotNormalizable);
        }
        cumulative.iter_mut().for_each(|c| *c /= acc);
        Ok(GridCdf {
            grid: grid.to_vec(),
            cumulative,
        })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let g = &self.grid;
        if y <= g[0] {
            return 0.0;
        }
        if y >= g[g.len() - 1] {
            return 1.0;
        }
        let i = g.partition_point(|&v| v <= y);
        let t = (y - g[i - 1]) / (g[i] - g[i - 1]);
        self.cumulative[i - 1] + t * (self.cumulative[i] - self.cumulative[i - 1])
    }

    /// Smallest grid-interpolated `y` with `cdf(y) ≥ q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let c = &self.cumulative;
        let i = c.partition_point(|&v| v < q).clamp(1, c.len() - 1);
        let span = c[i] - c[i - 1];
        let t = if span > 0.0 { (q - c[i - 1]) / span } else { 0.0 };
        self.grid[i - 1] + t * (self.grid[i] - self.grid[i - 1])
    }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of 1-D hypotheses
/// and the CDF of `density^exponent` normalized on `grid`.
pub fn density_exponent_ks(
    hyps_1d: &HypothesisSet,
    grid: &[f64],
    density: &[f64],
    exponent: f64,
) -> Result<f64> {
    check_dim(1, hyps_1d.dim())?;
    if hyps_1d.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    let cdf = GridCdf::new(grid, density, exponent)?;
    let mut sorted = hyps_1d.as_flat().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let f = cdf.cdf(h);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Negative log-likelihood

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "rule", content = "value", rename_all = "snake_case")
)]
pub enum Bandwidth {
    /// `N^{−1/(n+4)} σ̂_d` per dimension.
    Scott,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum Estimator {
    Norm,
    Kde {
        rule: Bandwidth,
        /// Bandwidth per dimension, averaged over the hypothesis sets used.
        bandwidth: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NllReport {
    pub estimator: Estimator,
    pub nll_per_sample: f64,
    pub test_count: u64,
}

/// Gaussian with population moments of the hypotheses, diagonal-loaded by
/// `1e-9 · trace / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFit {
    mean: Vec<f64>,
    factor: Vec<f64>,
    log_norm: f64,
}

impl GaussianFit {
    pub fn fit(hyps: &HypothesisSet) -> Result<Self> {
        let d = hyps.dim();
        if hyps.len() <= d {
            return Err(invalid("a normal fit needs more hypotheses than label dimensions"));
        }
        let mean = hyps.mean();
        let mut cov = vec![0.0; d * d];
        for p in hyps.iter() {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (p[i] - mean[i]) * (p[j] - mean[j]);
                }
            }
        }
        let n = hyps.len() as f64;
        cov.iter_mut().for_each(|c| *c /= n);
        let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
        for i in 0..d {
            cov[i * d + i] += 1e-9 * trace / d as f64;
        }
        let factor = linalg::cholesky(&cov, d)?;
        let log_norm = 0.5 * (d as f64 * libm::log(2.0 * PI) + linalg::log_det(&factor, d));
        Ok(GaussianFit {
            mean,
            factor,
            log_norm,
        })
    }

    pub fn nll(&self, y: &[f64]) -> f64 {
        let d = self.mean.len();
        let mut z: Vec<f64> = y.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        linalg::forward_substitute(&self.factor, d, &mut z);
        self.log_norm + 0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Product-Gaussian kernel density over the hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeFit {
    centers: PointSet,
    bandwidth: Vec<f64>,
    log_norm: f64,
}

impl KdeFit {
    pub fn fit(hyps: &HypothesisSet, rule: Bandwidth) -> Result<Self> {
        if hyps.is_empty() {
            return Err(Error::EmptyHypotheses);
        }
        let d = hyps.dim();
        let bandwidth = match rule {
            Bandwidth::Fixed(h) => {
                if !(h > 0.0) || !h.is_finite() {
                    return Err(invalid("bandwidth must be positive"));
                }
                vec![h; d]
            }
            Bandwidth::Scott => {
                let n = hyps.len();
                if n < 2 {
                    return Err(Error::ZeroVariance { dim: 0 });
                }
                let factor = libm::pow(n as f64, -1.0 / (d as f64 + 4.0));
                let var = hyps.variance();
                let ddof = n as f64 / (n as f64 - 1.0);
                let mut bw = Vec::with_capacity(d);
                for (j, v) in var.iter().enumerate() {
                    if !(*v > 0.0) {
                        return Err(Error::ZeroVariance { dim: j });
                    }
                    bw.push(factor * libm::sqrt(v * ddof));
                }
                bw
            }
        };
        let log_norm = libm::log(hyps.len() as f64)
            + bandwidth.iter().map(|b| libm::log(b * libm::sqrt(2.0 * PI))).sum::<f64>();
        Ok(KdeFit {
            centers: hyps.clone(),
            bandwidth,
            log_norm,
        })
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn log_density(&self, y: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .centers
            .iter()
            .map(|c| {
                -0.5 * c
                    .iter()
                    .zip(y)
                    .zip(&self.bandwidth)
                    .map(|((c, v), b)| {
                        let z = (v - c) / b;
                        z * z
                    })
                    .sum::<f64>()
            })
            .collect();
        log_sum_exp(&terms) - self.log_norm
    }
}

fn check_test(hyps: &HypothesisSet, test: &PointSet) -> Result<()> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    check_dim(hyps.dim(), test.dim())
}

pub fn nll_norm(hyps: &HypothesisSet, test: &PointSet) -> Result<NllReport> {
    check_test(hyps, test)?;
    let fit = GaussianFit::fit(hyps)?;
    let total: f64 = test.iter().map(|y| fit.nll(y)).sum();
    Ok(NllReport {
        estimator: Estimator::Norm,
        nll_per_sample: total / test.len() as f64,
        test_count: test.len() as u64,
    })
}

pub fn nll_kde(hyps: &HypothesisSet, test: &PointSet, bandwidth: Bandwidth) -> Result<NllReport> {
    check_test(hyps, test)?;
    let fit = KdeFit::fit(hyps, bandwidth)?;
    let total: f64 = test.iter().map(|y| -fit.log_density(y)).sum();
    Ok(NllReport {
        estimator: Estimator::Kde {
            rule: bandwidth,
            bandwidth: fit.bandwidth.clone(),
        },
        nll_per_sample: total / test.len() as f64,
        test_count: test.len() as u64,
    })
}

/// NLL of each observed label under estimators fitted to the model's
/// hypotheses at its own features, averaged over `test`.
pub fn conditional_nll(model: &MhpModel, test: &Dataset, bandwidth: Bandwidth) -> Result<(NllReport, NllReport)> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    check_dim(model.spec().input_dim, test.feature_dim())?;
    check_dim(model.spec().label_dim, test.label_dim())?;
    let d = test.label_dim();
    let mut norm_total = 0.0;
    let mut kde_total = 0.0;
    let mut bw_sum = vec![0.0; d];
    for (x, y) in test.iter() {
        let hyps = model.forward(x)?;
        norm_total += GaussianFit::fit(&hyps)?.nll(y);
        let kde = KdeFit::fit(&hyps, bandwidth)?;
        kde_total -= kde.log_density(y);
        bw_sum.iter_mut().zip(kde.bandwidth()).for_each(|(s, b)| *s += b);
    }
    let count = test.len() as f64;
    bw_sum.iter_mut().for_each(|b| *b /= count);
    Ok((
        NllReport {
            estimator: Estimator::Norm,
            nll_per_sample: norm_total / count,
            test_count: test.len() as u64,
        },
        NllReport {
            estimator: Estimator::Kde {
                rule: bandwidth,
                bandwidth: bw_sum,
            },
            nll_per_sample: kde_total / count,
            test_count: test.len() as u64,
        },
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Row {
    pub metric: WtaMetric,
    pub norm: NllReport,
    pub kde: NllReport,
    pub history: Vec<f64>,
}

/// Trains one model per config (configs must differ only in their metric)
/// and reports conditional NLL under both estimators, rows in input order.
pub fn table1_protocol(
    train_data: &Dataset,
    test_data: &Dataset,
    spec: &NetworkSpec,
    configs: [&TrainConfig; 2],
) -> Result<[Table1Row; 2]> {
    if test_data.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut a = configs[0].clone();
    a.metric = configs[1].metric;
    if a != *configs[1] {
        return Err(invalid("configs must be identical except for the metric"));
    }
    let run = |cfg: &TrainConfig| -> Result<Table1Row> {
        let outcome = train(spec, train_data, cfg)?;
        let (norm, kde) = conditional_nll(&outcome.model, test_data, Bandwidth::Scott)?;
        Ok(Table1Row {
            metric: cfg.metric,
            norm,
            kde,
            history: outcome.history,
        })
    };
    Ok([run(configs[0])?, run(configs[1])?])
}
