//! Simulation of a deep-learning wireless authentication system and an
//! over-the-air membership inference attack against it.
//!
//! The pipeline mirrors what an eavesdropper can actually do:
//!
//! 1. [`rfsim`] generates phase/power fingerprints seen by the service
//!    provider and, through a different channel, by the adversary.
//! 2. [`classify`] trains the provider's target classifier and the
//!    adversary's surrogate, labelled by observed service grants.
//! 3. [`mia`] fits an inference model on (features, surrogate posterior)
//!    by maximizing the empirical membership gain and evaluates it.
//! 4. [`harness`] wires the stages into the four evaluation scenarios and
//!    persists every artifact.
//!
//! The numerical core in [`tinynn`] and the gain arithmetic in [`mia`] are
//! generic over the floating-point type; the aliases below fix the
//! pipeline to `f64`.

pub mod classify;
pub mod error;
mod fsio;
pub mod harness;
pub mod mia;
pub mod rfsim;
pub mod rng;
pub mod scalar;
pub mod tinynn;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense network in double precision, as used throughout the pipeline.
pub type Network = tinynn::DenseNetwork<f64>;
/// Adam optimizer state matching [`Network`].
pub type Adam = tinynn::AdamState<f64>;
/// Parameter gradients matching [`Network`].
pub type Gradients = tinynn::Gradients<f64>;
/// Target or surrogate classifier in double precision.
pub type Classifier = classify::Classifier<f64>;
/// Membership inference model in double precision.
pub type InferenceModel = mia::MiaModel<f64>;
/// Confusion matrix in double precision.
pub type Confusion = mia::ConfusionMatrix<f64>;

/// Single-precision variants, for callers that trade accuracy for speed.
pub mod f32 {
    pub type Network = crate::tinynn::DenseNetwork<f32>;
    pub type Adam = crate::tinynn::AdamState<f32>;
    pub type Classifier = crate::classify::Classifier<f32>;
    pub type InferenceModel = crate::mia::MiaModel<f32>;
}
