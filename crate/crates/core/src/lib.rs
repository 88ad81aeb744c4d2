//! Learned short block codes for fading channels with no channel state
//! information or with channel state at the receiver only.
//!
//! The numeric core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod autoencoder;
pub mod channel;
pub mod classical;
mod error;
pub mod evaluation;
pub mod experiments;
pub mod neural;
pub mod numerics;
pub mod scalar;

pub use error::{Error, Result};

pub type Matrix = neural::Matrix<f64>;
pub type Network = neural::Network<f64>;
pub type TrainedSystem = autoencoder::TrainedSystem<f64>;
pub type LearnedChain = evaluation::LearnedChain<f64>;
pub type AwgnTransferChain = evaluation::AwgnTransferChain<f64>;

pub type Matrix32 = neural::Matrix<f32>;
pub type Network32 = neural::Network<f32>;
pub type TrainedSystem32 = autoencoder::TrainedSystem<f32>;
