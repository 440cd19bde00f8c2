//! Attribution robustness for small fully-connected ReLU networks.
//!
//! The crate covers integrated-gradients attribution, rank and similarity
//! metrics between attributions, attribution and adversarial attacks,
//! robust training with an attribution-alignment regularizer, activation
//! consistency analysis, and Monte Carlo checks of the cosine/Kendall
//! relationship.

pub mod attacks;
pub mod attribution;
pub mod checkpoint;
pub mod config;
pub mod consistency;
pub mod data;
pub mod error;
pub mod experiment;
pub mod grad;
pub mod metrics;
pub mod mlp;
pub mod par;
pub mod rng;
pub mod tensor;
pub mod theoremlab;
pub mod training;

pub use error::{Error, Result};
pub use mlp::{Init, Layer, MlpModel};
pub use tensor::Tensor;
