//! Training configuration and first-order optimizers shared by the network
//! trainer and the unconditional quantizer.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::metrics::WtaMetric;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

/// Linear annealing of the WTA relaxation: `initial` at the first step,
/// reaching zero after `anneal_fraction` of all steps.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub anneal_fraction: f64,
}

impl EpsilonSchedule {
    pub const NONE: EpsilonSchedule = EpsilonSchedule {
        initial: 0.0,
        anneal_fraction: 0.5,
    };

    pub fn at(&self, progress: f64) -> f64 {
        if self.anneal_fraction <= 0.0 {
            return 0.0;
        }
        self.initial * (1.0 - progress / self.anneal_fraction).max(0.0)
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            initial: 0.05,
            anneal_fraction: 0.5,
        }
    }
}

/// Multiply the learning rate by `factor` every `every_epochs` epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepDecay {
    pub factor: f64,
    pub every_epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub metric: WtaMetric,
    pub epsilon: EpsilonSchedule,
    pub learning_rate: f64,
    pub lr_decay: Option<StepDecay>,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Network training only: draw hidden-layer biases from the same uniform
    /// range as the weights instead of starting them at zero.
    #[cfg_attr(feature = "serde", serde(default))]
    pub random_hidden_biases: bool,
}

impl TrainConfig {
    /// Network training defaults: Adam at `1e-3`, batch 256.
    pub fn mhp(metric: WtaMetric) -> Self {
        TrainConfig {
            metric,
            epsilon: EpsilonSchedule::default(),
            learning_rate: 1e-3,
            lr_decay: None,
            optimizer: Optimizer::ADAM,
            batch_size: 256,
            epochs: 50,
            seed: 0,
            random_hidden_biases: true,
        }
    }

    /// Quantizer defaults: Adam at `1e-2` halved every 25 epochs, 100 epochs,
    /// batch 256.
    pub fn quantizer(metric: WtaMetric) -> Self {
        TrainConfig {
            metric,
            epsilon: EpsilonSchedule::default(),
            learning_rate: 1e-2,
            lr_decay: Some(StepDecay {
                factor: 0.5,
                every_epochs: 25,
            }),
            optimizer: Optimizer::ADAM,
            batch_size: 256,
            epochs: 100,
            seed: 0,
            random_hidden_biases: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.epsilon.initial) {
            return Err(invalid("epsilon must lie in [0, 1)"));
        }
        if let Some(d) = self.lr_decay {
            if d.every_epochs == 0 || !(d.factor > 0.0) {
                return Err(invalid("learning-rate decay needs a positive factor and period"));
            }
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(invalid("Adam needs betas in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => self.learning_rate * libm::pow(d.factor, (epoch / d.every_epochs) as f64),
            None => self.learning_rate,
        }
    }
}

/// Per-parameter optimizer state over a flat parameter buffer.
#[derive(Clone, Debug)]
pub(crate) struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub(crate) fn new(kind: Optimizer, len: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (vec![0.0; len], vec![0.0; len]),
        };
        OptimizerState { kind, m, v, t: 0 }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                self.t = self.t.saturating_add(1);
                let c1 = 1.0 - libm::pow(beta1, f64::from(self.t));
                let c2 = 1.0 - libm::pow(beta2, f64::from(self.t));
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut())
                    .zip(self.v.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_anneals_linearly() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.at(0.0), 0.05);
        assert!((s.at(0.25) - 0.025).abs() < 1e-15);
        assert_eq!(s.at(0.5), 0.0);
        assert_eq!(s.at(0.9), 0.0);
    }

    #[test]
    fn step_decay() {
        let c = TrainConfig::quantizer(WtaMetric::SquaredEuclidean);
        assert_eq!(c.learning_rate_at(0), 1e-2);
        assert_eq!(c.learning_rate_at(24), 1e-2);
        assert_eq!(c.learning_rate_at(25), 5e-3);
        assert_eq!(c.learning_rate_at(99), 1.25e-3);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut st = OptimizerState::new(Optimizer::ADAM, 2);
        let mut p = [1.0, -1.0];
        st.step(&mut p, &[0.3, -20.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = TrainConfig::mhp(WtaMetric::SquaredEuclidean);
        assert!(c.validate().is_ok());
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::mhp(WtaMetric::SquaredEuclidean);
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }
}
