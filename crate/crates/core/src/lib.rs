//! Training-free evidence calibration for open-vocabulary semantic
//! segmentation.
//!
//! A promptable segmenter emits one mask per concept, but the per-concept
//! scores are not comparable across concepts. This crate puts them on one
//! additive logit scale:
//!
//! ```text
//! S_c(x) = logit(P_c(x)) + λ · log π_c(x) + z_c
//! ```
//!
//! where `π_c(x)` is a cross-class softmax over text–feature similarities
//! (synonyms of a class pooled with a tempered LogSumExp) and `z_c` is the
//! image-level presence logit. The label at each pixel is the argmax of
//! `S_c(x)`, with optional threshold-based background rejection.
//!
//! Modules:
//!
//! - [`tensor`]: dense grids, the CFT1 file format, bilinear resampling
//! - [`prompts`]: synonym prompt files
//! - [`embeddings`]: unit-normalized synonym embeddings
//! - [`prior`]: similarity maps, synonym aggregation, log prior
//! - [`fusion`]: unified-scale fusion and decoding
//! - [`eval`]: confusion matrix and mIoU
//! - [`lab`]: synthetic scenes and the competition sweep
//! - [`config`], [`cli`]: run configuration and the `segfuse` binary

pub mod cli;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod lab;
pub mod prior;
pub mod prompts;
pub mod tensor;

pub use error::{Error, Result};
