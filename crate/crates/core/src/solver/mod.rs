//! Time integration in similarity variables and in the original variables.

pub mod grid;
pub mod initial;
pub mod linalg;
pub mod physical;
pub mod similarity;

pub use grid::{Grid, GridKind};
pub use initial::{build_initial_data, initial_log_values, initial_physical, perturb, profile_state, InitialDataSpec};
pub use physical::{
    estimate_blowup_time, run_physical, BlowupFit, PhysGrid, PhysicalOptions, PhysicalTrajectory, StopReason,
};
pub use similarity::{
    run, stable_ds, step, step_with_source, Boundary, Control, RunOptions, RunSummary, SimilarityState, Source,
    StepOptions, StepReport,
};
