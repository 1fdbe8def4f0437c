//! Multiple hypotheses prediction under the winner-takes-all loss.
//!
//! A model emits `N` hypotheses per input and is trained on the distance from
//! each observation to its closest hypothesis. With the squared Euclidean
//! distance the hypotheses spread out like `p^{n/(n+2)}`; with the log
//! distance `ln(‖a − b‖ + δ)` they follow the data density `p` itself, so
//! every Voronoi cell ends up holding about the same share of data.
//!
//! The crate is `no_std` and needs only `alloc`:
//!
//! * [`metrics`]: both distances and their gradients
//! * [`wta`]: the loss and its (optionally relaxed) gradient
//! * [`network`] / [`trainer`]: the MHP network, backpropagation, training
//! * [`quantizer`]: unconditional hypothesis placement
//! * [`datasets`]: seeded synthetic generators
//! * [`evaluation`]: shares, moment probes, KS and NLL statistics
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod datasets;
pub mod error;
pub mod evaluation;
mod linalg;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod points;
pub mod quantizer;
pub mod rng;
pub mod trainer;
pub mod wta;

pub use error::{Error, Result};
pub use metrics::WtaMetric;
pub use network::{init_network, Activation, NetworkParams, NetworkSpec};
pub use optim::{EpsilonSchedule, Optimizer, StepDecay, TrainConfig};
pub use points::{Dataset, HypothesisSet, PointSet};
pub use trainer::{train, MhpModel, TrainOutcome};
