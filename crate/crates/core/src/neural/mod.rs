//! Minimal feedforward engine: dense layers, ReLU, energy normalization,
//! softmax cross-entropy, Adam, finite-difference checks, and a binary
//! model format.

mod adam;
pub mod gradcheck;
mod layers;
mod matrix;
mod network;
mod serialize;

pub use adam::{AdamConfig, AdamState};
pub use layers::{
    energy_normalize_backward, energy_normalize_forward, relu_backward, relu_forward, softmax,
    softmax_cross_entropy, Dense, DenseGrad, SoftmaxCrossEntropy, DEGENERATE_NORM,
};
pub use matrix::Matrix;
pub use network::{Gradients, Head, Layer, Network, Trace};
pub use serialize::{EXTENSION, MAGIC, VERSION};
