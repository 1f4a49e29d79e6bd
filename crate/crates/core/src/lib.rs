//! Two-stream zero-shot recognition of signs and actions from RGB-D clips.
//!
//! The pipeline segments each frame into nine body parts from keypoints,
//! encodes the part crops with a transformer, folds frames with an LSTM per
//! modality, fuses the two streams, projects into a class-embedding space and
//! classifies unseen classes by cosine nearest neighbour.

pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod gradcheck;
pub mod gradsuite;
pub mod harness;
pub mod model;
pub mod nn;
pub mod param;
pub mod rng;
pub mod temporal;
pub mod tensor;
pub mod zeroshot;

pub use error::{Error, Result};
pub use param::{Adam, Module, Parameter};
pub use rng::SplitMix64;
pub use tensor::Tensor;
