//! Experiment configuration. Every field has a default, so an empty JSON
//! object (or no file at all) is a complete config; command-line flags are
//! applied on top.

use std::path::Path;

use dpmhp_core::datasets::CallCenterModel;
use dpmhp_core::evaluation::Bandwidth;
use dpmhp_core::{Activation, EpsilonSchedule, Optimizer, StepDecay, TrainConfig, WtaMetric};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    CallCenter,
    Fig1,
    Normal,
    Surrogate,
}

impl DataKind {
    pub fn name(self) -> &'static str {
        match self {
            DataKind::CallCenter => "call-center",
            DataKind::Fig1 => "fig1",
            DataKind::Normal => "normal",
            DataKind::Surrogate => "surrogate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    L2,
    Ldp,
}

impl MetricKind {
    /// `delta` is only read for the log distance.
    pub fn with_delta(self, delta: f64) -> WtaMetric {
        match self {
            MetricKind::L2 => WtaMetric::SquaredEuclidean,
            MetricKind::Ldp => WtaMetric::LogDistance { delta },
        }
    }
}

/// Optimizer settings shared by the quantizer and the network trainer. The
/// metric and seed are supplied separately.
///
/// A partially written `train` object fills its missing fields from the
/// network-training defaults, whichever section it appears in. Spell out
/// `lr_decay` when overriding a quantizer or experiment schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub lr_decay: Option<StepDecay>,
    pub epsilon: EpsilonSchedule,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub epochs: usize,
    pub random_hidden_biases: bool,
}

impl TrainSettings {
    fn from_core(c: TrainConfig) -> Self {
        TrainSettings {
            learning_rate: c.learning_rate,
            lr_decay: c.lr_decay,
            epsilon: c.epsilon,
            optimizer: c.optimizer,
            batch_size: c.batch_size,
            epochs: c.epochs,
            random_hidden_biases: c.random_hidden_biases,
        }
    }

    pub fn quantizer() -> Self {
        Self::from_core(TrainConfig::quantizer(WtaMetric::SquaredEuclidean))
    }

    pub fn mhp() -> Self {
        Self::from_core(TrainConfig::mhp(WtaMetric::SquaredEuclidean))
    }

    pub fn build(&self, metric: WtaMetric, seed: u64) -> TrainConfig {
        TrainConfig {
            metric,
            epsilon: self.epsilon,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            optimizer: self.optimizer,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            random_hidden_biases: self.random_hidden_biases,
        }
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self::mhp()
    }
}

fn halve_every(epochs: usize) -> Option<StepDecay> {
    Some(StepDecay {
        factor: 0.5,
        every_epochs: epochs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub n_hypotheses: usize,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        NetworkSettings {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            n_hypotheses: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    pub kind: DataKind,
    pub k: usize,
    pub call_center: CallCenterModel,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        GenDataConfig {
            kind: DataKind::CallCenter,
            k: 50_000,
            call_center: CallCenterModel::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerConfig {
    pub n: usize,
    pub metric: MetricKind,
    /// `None` picks `1e-3` times the data diameter.
    pub delta: Option<f64>,
    pub train: TrainSettings,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            n: 150,
            metric: MetricKind::Ldp,
            delta: None,
            train: TrainSettings::quantizer(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhpConfig {
    pub metric: MetricKind,
    pub delta: Option<f64>,
    pub network: NetworkSettings,
    /// Checked against the data before training when set.
    pub input_dim: Option<usize>,
    pub label_dim: Option<usize>,
    pub train: TrainSettings,
}

impl Default for MhpConfig {
    fn default() -> Self {
        MhpConfig {
            metric: MetricKind::Ldp,
            delta: None,
            network: NetworkSettings::default(),
            input_dim: None,
            label_dim: None,
            train: TrainSettings::mhp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.end - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            start: 6.0,
            end: 20.0,
            points: 29,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Inputs for the conditional moment curve (call-center models).
    pub x_grid: Grid,
    /// Inputs at which conditional Voronoi shares are reported.
    pub share_inputs: Vec<Vec<f64>>,
    pub share_samples: usize,
    pub bandwidth: Bandwidth,
    pub call_center: CallCenterModel,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            x_grid: Grid::default(),
            share_inputs: Vec::new(),
            share_samples: 100_000,
            bandwidth: Bandwidth::Scott,
            call_center: CallCenterModel::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Config {
    pub n: usize,
    pub train_samples: usize,
    pub assignment_samples: usize,
    pub seeds: usize,
    pub quantizer: TrainSettings,
    pub min_fraction_in_band: f64,
    pub max_chi_ratio: f64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            n: 150,
            train_samples: 50_000,
            assignment_samples: 100_000,
            seeds: 5,
            quantizer: TrainSettings::quantizer(),
            min_fraction_in_band: 0.9,
            max_chi_ratio: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub n: usize,
    pub train_samples: usize,
    pub quantizer: TrainSettings,
    pub max_ldp_ks: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            n: 100,
            train_samples: 100_000,
            quantizer: TrainSettings::quantizer(),
            max_ldp_ks: 0.07,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CallCenterConfig {
    pub model: CallCenterModel,
    pub train_samples: usize,
    pub network: NetworkSettings,
    pub train: TrainSettings,
    pub x_grid: Grid,
    pub max_ldp_mean_error: f64,
}

impl Default for CallCenterConfig {
    fn default() -> Self {
        let mut train = TrainSettings::mhp();
        train.epochs = 40;
        train.lr_decay = halve_every(10);
        CallCenterConfig {
            model: CallCenterModel::default(),
            train_samples: 50_000,
            network: NetworkSettings::default(),
            train,
            x_grid: Grid::default(),
            max_ldp_mean_error: 0.10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Config {
    pub train_samples: usize,
    pub test_samples: usize,
    pub network: NetworkSettings,
    pub train: TrainSettings,
    pub bandwidth: Bandwidth,
}

impl Default for Table1Config {
    fn default() -> Self {
        let mut train = TrainSettings::mhp();
        train.epochs = 120;
        train.lr_decay = halve_every(30);
        Table1Config {
            train_samples: 100_000,
            test_samples: 10_000,
            network: NetworkSettings {
                n_hypotheses: 100,
                ..NetworkSettings::default()
            },
            train,
            bandwidth: Bandwidth::Scott,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Worker threads for evaluation; training is always single-threaded.
    pub threads: Option<usize>,
    pub gen_data: GenDataConfig,
    pub quantizer: QuantizerConfig,
    pub mhp: MhpConfig,
    pub eval: EvalConfig,
    pub fig1: Fig1Config,
    pub density: DensityConfig,
    pub callcenter: CallCenterConfig,
    pub table1: Table1Config,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(1).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let c: Config = serde_json::from_str("{}").unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn defaults_round_trip() {
        let text = serde_json::to_string_pretty(&Config::default()).unwrap();
        let back: Config = serde_json::from_str(&text).unwrap();
        assert_eq!(back, Config::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c: Config = serde_json::from_str(r#"{"seed": 4, "mhp": {"metric": "l2", "train": {"epochs": 3}}}"#).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.mhp.metric, MetricKind::L2);
        assert_eq!(c.mhp.train.epochs, 3);
        assert_eq!(c.mhp.train.batch_size, 256);
        assert_eq!(c.mhp.network, NetworkSettings::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn grid_values() {
        let g = Grid::default().values();
        assert_eq!(g.len(), 29);
        assert_eq!(g[0], 6.0);
        assert_eq!(g[28], 20.0);
        assert_eq!(g[1], 6.5);
    }
}
