//! Vapor-liquid equilibrium of CO2 + hydrocarbon mixtures with the PR78 cubic
//! equation of state and group-contribution (PPR78) binary interaction
//! parameters, plus calibration of the CO2-CH4 interaction parameter against
//! measured saturation pressures.
//!
//! Internal units are SI (K, Pa, m³/mol). MPa only appears at the file and
//! CLI boundary in [`workbench`].

// `!(x > y)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eos;
pub mod error;
pub mod flash;
pub mod metrics;
pub mod mixing;
pub mod optimizer;
pub mod saturation;
pub mod workbench;

pub use eos::{Component, CubicRoots, PhaseRoot, PureParams, GAS_CONSTANT};
pub use error::{Error, Result};
pub use flash::{FlashOptions, FlashResult, Mixture, StabilityReport};
pub use metrics::{MetricKind, MetricReport, PairedSeries};
pub use mixing::{GroupInteractionTable, KijMatrix, Provenance};
pub use optimizer::{CostEvaluation, ExperimentalDataset, OptimizationResult};
pub use saturation::{SaturationCurve, SaturationKind, SaturationPoint, Strategy};
