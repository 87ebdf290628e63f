//! Hyperspectral image classification with a multiview transformer.
//!
//! The pipeline runs min-max normalization and multiview PCA over a cube
//! ([`data`], [`mpca`]), then classifies pixel-centred patches with a
//! convolutional spectral encoder-decoder followed by a quadrant-pooling
//! tokenizer and one multi-head attention block ([`model`]). [`train`] holds
//! the optimizer, training loop, metrics and the rotated-patch audit.

pub mod data;
pub mod error;
pub mod format;
pub mod map;
pub mod model;
pub mod mpca;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{GradGraph, NodeId, Scalar, Tensor};
