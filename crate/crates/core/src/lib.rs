//! Behavior-level simulator and design toolkit for epitome-based CNN
//! layers on memristor crossbar accelerators.
//!
//! The crate models the full deployment path of a compact "epitome"
//! operator: reconstructing convolution weights from sampled patches
//! ([`epitome`]), placing them on fixed-size crossbars ([`mapping`]),
//! driving the multi-round datapath through index tables ([`datapath`]),
//! pricing the resulting event trace with a cost lookup table ([`perf`]),
//! computing overlap-aware fixed-point parameters ([`quant`]), and
//! searching per-layer epitome shapes under a crossbar budget
//! ([`search`]).
//!
//! Core numerics are generic over the stored scalar via [`Scalar`]; the
//! aliases below pin the common instantiations. Integer tensors make the
//! datapath equivalence checks exact.

pub mod conv;
pub mod datapath;
pub mod epitome;
pub mod error;
pub mod mapping;
pub mod network;
pub mod perf;
pub mod quant;
pub mod scalar;
pub mod search;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{CountTensor, FeatureMap, WeightTensor};

pub type WeightsF32 = WeightTensor<f32>;
pub type WeightsF64 = WeightTensor<f64>;
pub type WeightsI64 = WeightTensor<i64>;
pub type FeatureF32 = FeatureMap<f32>;
pub type FeatureF64 = FeatureMap<f64>;
pub type FeatureI64 = FeatureMap<i64>;
pub type QuantParamsF32 = quant::QuantParams<f32>;
pub type QuantParamsF64 = quant::QuantParams<f64>;
pub type RangeWeightsF64 = quant::RangeWeights<f64>;
