//! Mini-batch training of an MHP network and the trained model wrapper.
//!
//! Features are standardized per dimension. Labels are centred and divided
//! by a single isotropic scale, which keeps Euclidean geometry (and hence the
//! WTA partition) intact; the log metric's `delta` is rescaled to match.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::network::{init_network, NetworkParams, NetworkSpec, Workspace};
use crate::optim::{OptimizerState, TrainConfig};
use crate::points::{Dataset, HypothesisSet, PointSet};
use crate::rng;

/// A trained network together with the affine maps around it.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MhpModel {
    pub params: NetworkParams,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub label_offset: Vec<f64>,
    pub label_scale: f64,
    pub metric: crate::metrics::WtaMetric,
}

impl MhpModel {
    pub fn spec(&self) -> &NetworkSpec {
        self.params.spec()
    }

    /// Model with identity input/label maps.
    pub fn from_params(params: NetworkParams, metric: crate::metrics::WtaMetric) -> Self {
        let spec = params.spec().clone();
        MhpModel {
            params,
            input_mean: vec![0.0; spec.input_dim],
            input_scale: vec![1.0; spec.input_dim],
            label_offset: vec![0.0; spec.label_dim],
            label_scale: 1.0,
            metric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec();
        check_dim(spec.input_dim, self.input_mean.len())?;
        check_dim(spec.input_dim, self.input_scale.len())?;
        check_dim(spec.label_dim, self.label_offset.len())?;
        if self.input_scale.iter().any(|s| !(*s > 0.0)) || !(self.label_scale > 0.0) {
            return Err(crate::error::invalid("scales must be positive"));
        }
        self.metric.validate()
    }

    pub(crate) fn standardize_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.input_mean).zip(&self.input_scale) {
            *o = (v - m) / s;
        }
    }

    /// Hypotheses for `x`, in label units.
    pub fn forward(&self, x: &[f64]) -> Result<HypothesisSet> {
        check_dim(self.spec().input_dim, x.len())?;
        let mut z = vec![0.0; x.len()];
        self.standardize_into(x, &mut z);
        let raw = self.params.forward(&z)?;
        let n = raw.dim();
        let mut coords = raw.into_flat();
        for p in coords.chunks_exact_mut(n) {
            for (c, o) in p.iter_mut().zip(&self.label_offset) {
                *c = o + self.label_scale * *c;
            }
        }
        PointSet::new(n, coords)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: MhpModel,
    /// Mean plain WTA loss per epoch, in label units.
    pub history: Vec<f64>,
    /// Per-hypothesis win counts during the final epoch.
    pub final_epoch_wins: Vec<u64>,
}

fn standardization(set: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let mean = set.mean();
    let scale = set
        .variance()
        .into_iter()
        .map(|v| if v > 0.0 { libm::sqrt(v) } else { 1.0 })
        .collect();
    (mean, scale)
}

fn isotropic_scale(set: &PointSet) -> f64 {
    let var = set.variance();
    let s = libm::sqrt(var.iter().sum::<f64>() / var.len() as f64);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Trains an MHP network on `data`. Deterministic for a given `cfg.seed`.
pub fn train(spec: &NetworkSpec, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    spec.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    check_dim(spec.input_dim, data.feature_dim())?;
    check_dim(spec.label_dim, data.label_dim())?;

    let (input_mean, input_scale) = standardization(&data.features);
    let label_offset = data.labels.mean();
    let label_scale = isotropic_scale(&data.labels);

    let mut features = data.features.clone();
    for p in features.as_flat_mut().chunks_exact_mut(spec.input_dim) {
        for ((v, m), s) in p.iter_mut().zip(&input_mean).zip(&input_scale) {
            *v = (*v - m) / s;
        }
    }
    let mut labels = data.labels.clone();
    for p in labels.as_flat_mut().chunks_exact_mut(spec.label_dim) {
        for (v, m) in p.iter_mut().zip(&label_offset) {
            *v = (*v - m) / label_scale;
        }
    }
    let metric = cfg.metric.rescaled(label_scale);

    let mut params = init_network(spec, rng::derive_seed(cfg.seed, "mhp-init"))?;
    if cfg.random_hidden_biases {
        // Zero biases with an odd activation and centred inputs make every
        // unit an odd function of the input at the start.
        let mut pick = rng::stream(cfg.seed, "mhp-bias-init");
        for (l, (inputs, _)) in spec.layer_shapes().into_iter().enumerate().take(spec.hidden.len()) {
            let bound = 1.0 / libm::sqrt(inputs as f64);
            let (_, bias) = params.layer_mut(l);
            for b in bias.iter_mut() {
                *b = pick.random_range(-bound..bound);
            }
        }
    }
    let mut opt = OptimizerState::new(cfg.optimizer, spec.param_count());
    let mut grads = vec![0.0; spec.param_count()];
    let mut ws = Workspace::new(spec);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle = rng::stream(cfg.seed, "mhp-shuffle");

    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs).max(1);
    let mut step = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut wins = vec![0u64; spec.n_hypotheses];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        wins.iter_mut().for_each(|w| *w = 0);
        let lr = cfg.learning_rate_at(epoch);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let epsilon = cfg.epsilon.at(step as f64 / total_steps as f64);
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &k in batch {
                let s = params
                    .accumulate_backward(&mut ws, features.point(k), labels.point(k), metric, epsilon, &mut grads)
                    .map_err(|e| match e {
                        Error::NonFinite { .. } => Error::Diverged { epoch },
                        other => other,
                    })?;
                loss_sum += s.wta_loss;
                wins[s.winner] += 1;
            }
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= inv);
            opt.step(params.as_mut_slice(), &grads, lr);
            step += 1;
        }
        let mean = metric.loss_in_original_units(loss_sum / data.len() as f64, label_scale);
        if !mean.is_finite() || params.as_slice().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        history.push(mean);
    }

    Ok(TrainOutcome {
        model: MhpModel {
            params,
            input_mean,
            input_scale,
            label_offset,
            label_scale,
            metric: cfg.metric,
        },
        history,
        final_epoch_wins: wins,
    })
}
