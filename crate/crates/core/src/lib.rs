//! Core algorithms for evaluating generative models by peer review.
//!
//! A pool of candidate reviewer models sits a qualification exam against gold
//! labels; the ones that pass rate evaluatee outputs, and a chair combines
//! their ratings with log-odds vote weights. This crate holds everything that
//! does not touch the filesystem or the network: corpus validation, prompt
//! rendering, judgment parsing, exam scoring, job construction, aggregation,
//! rank-correlation metrics and the self-preference diagnostics.
//!
//! The crate is `no_std` and only needs `alloc`. The `peer-eval` crate wraps
//! it with file formats, model backends and the command line.

#![no_std]

extern crate alloc;

pub mod chair;
pub mod corpus;
pub mod error;
pub mod exam;
pub mod hash;
pub mod jobs;
pub mod judgment;
pub mod metrics;
pub mod bias;
pub mod prompt;
pub mod scripted;
pub mod special;
pub mod types;

pub use error::{Error, Result};
pub use types::{Choice, PromptSetting, TiePolicy, Verdict};
