//! Linear Memory Network.
//!
//! A recurrent model split into a nonlinear feedforward functional component
//! and a linear memory that behaves as a linear autoencoder for the sequence
//! of functional activations. The crate provides:
//!
//! - [`linalg`]: dense matrices and truncated SVD,
//! - [`seqae`]: the closed-form linear sequence autoencoder,
//! - [`model`]: LMN, unfolded and vanilla RNN forward passes, checkpoints,
//! - [`train`]: BPTT gradients, Adam, early stopping, gradient checks,
//! - [`pretrain`]: unfolded-network → autoencoder → LMN weight transfer,
//! - [`data`]: piano-roll datasets, frame accuracy, synthetic tasks.

pub mod data;
pub mod error;
pub mod linalg;
pub mod model;
pub mod pretrain;
pub mod seqae;
pub mod train;

pub use error::{Error, Result};
pub use linalg::Matrix;
