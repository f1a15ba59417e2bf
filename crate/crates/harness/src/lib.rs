//! File formats, model backends, stage orchestration and the command line
//! around `peer-eval-core`.

pub mod backend;
pub mod config;
pub mod error;
pub mod exam;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod review;
pub mod store;
pub mod synthetic;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use pipeline::Run;
