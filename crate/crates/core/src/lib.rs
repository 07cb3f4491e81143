//! Tracking-learning-parsing with online And-Or graph (AOG) object models.
//!
//! A single object is tracked by parsing every frame with an object AOG
//! (a pruned subgraph of the full grid AOG of part configurations), decoding
//! the trajectory with a short-horizon temporal dynamic program, and
//! re-learning the AOG structure online when the model becomes uncertain.

pub mod aog;
pub mod config;
pub mod error;
pub mod features;
pub mod flow;
pub mod geometry;
pub mod learner;
pub mod model;
pub mod parser;
pub mod tracker;

/// Crate version, recorded in evaluation manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use config::EngineConfig;
pub use error::{Error, Result};
pub use geometry::BBox;
