// SPDX-License-Identifier: Apache-2.0

//! Cycle-accurate simulator of a hybrid wired/wireless mesh network-on-chip
//! with token-passing and prediction-driven wireless MAC schemes.

pub mod energy_metrics;
pub mod config;
pub mod error;
pub mod harness;
pub mod mac;
pub mod network;
pub mod plot;
pub mod predictor;
pub mod routing;
pub mod scalar;
pub mod topology;
pub mod traffic;
pub mod tuner;

pub use error::{Error, Result};
pub use routing::{ForwardingTable, Port};
pub use topology::Topology;
pub use scalar::Real;

/// Double-precision predictor and tuner types used by the simulator.
pub type Weights = predictor::PidWeights<f64>;
pub type Predictor = predictor::PredictionUnit<f64>;
pub type TuneOptions = tuner::TuneOptions<f64>;
pub type TuneResult = tuner::TuneResult<f64>;

/// Single-precision variants.
pub type WeightsF32 = predictor::PidWeights<f32>;
pub type PredictorF32 = predictor::PredictionUnit<f32>;
pub type TuneOptionsF32 = tuner::TuneOptions<f32>;
pub type TuneResultF32 = tuner::TuneResult<f32>;
