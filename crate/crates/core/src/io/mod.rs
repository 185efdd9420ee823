//! Run configuration, the stage pipeline and the emitted data files.

pub mod config;
pub mod pipeline;
pub mod schema;

pub use config::{InitialKind, Mode, RunConfig};
pub use pipeline::{emit_outputs, replay, run_pipeline, Manifest, Outcome, MANIFEST};
