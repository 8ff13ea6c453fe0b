//! Secondary-carrier link prediction from uplink channel responses.
//!
//! The crate simulates macro/micro deployments, synthesizes OFDM channel
//! responses at the serving macro, labels each UE by whether a micro
//! (secondary) carrier is usable, and evaluates classifiers with
//! cross-validated ROC analysis. The numerical core is generic over
//! [`Real`]; the aliases below fix it to `f64` or `f32`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod events;
pub mod features;
pub mod io;
pub mod labeling;
pub mod models;
pub mod pipeline;
pub mod real;
pub mod rng;
pub mod sampling;
pub mod scenario;
pub mod svg;

pub use dataset::{Dataset, RowOrigin};
pub use error::{Error, Result};
pub use labeling::{ClassRatio, Label};
pub use real::Real;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Cfr64 = channel::ChannelFrequencyResponse<f64>;
pub type Cfr32 = channel::ChannelFrequencyResponse<f32>;
pub type Forest64 = models::RandomForestModel<f64>;
pub type Forest32 = models::RandomForestModel<f32>;
pub type MapModel64 = models::GaussianMapModel<f64>;
pub type MapModel32 = models::GaussianMapModel<f32>;
pub type RocCurve64 = eval::RocCurve<f64>;
pub type RocCurve32 = eval::RocCurve<f32>;
