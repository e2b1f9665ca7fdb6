// SPDX-License-Identifier: MIT OR Apache-2.0

//! Patch-effect graphs: build directed graphs from activation-patching
//! effect tensors, embed them, and compare slices with kernel SVMs.

pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hash;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod screened;
pub mod stats;
pub mod svm;
pub mod tensor;
pub mod toy;

pub use error::{Error, Result};
