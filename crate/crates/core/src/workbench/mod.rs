//! File ingestion, report emission, run persistence, and the command-line
//! interface.

pub mod cli;
pub mod commands;
pub mod experiments;
pub mod fluid;
pub mod library;
pub mod run;

pub use commands::{
    cmd_envelope, cmd_fit, cmd_flash, cmd_kij, cmd_metrics, EnvelopeArtifacts, FitArtifacts,
    ModelContext,
};
pub use experiments::{load_experiments, parse_experiments, write_experiments};
pub use fluid::{emit_fluid, load_fluid, parse_fluid, LoadedFluid};
pub use run::RunRecord;
