//! Estimators of potential outcome means and average treatment effects in a
//! target population, using a collection of randomized trials together with
//! a covariate-only sample from that population.
//!
//! The pipeline is: build an [`ObservationTable`], fit the working models
//! ([`estimators::fit_bundle`]), then evaluate the g-formula, weighting or
//! augmented estimator. [`inference`] adds bootstrap intervals,
//! [`diagnostics`] tests whether outcome means agree across trials, and
//! [`simulation`] reproduces the benchmark Monte Carlo study.

// Negated float comparisons are deliberate: they send NaN down the failure path.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod inference;
mod linalg;
pub mod nuisance;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use data::{CsvSchema, Observation, ObservationTable, TreatmentLevel, TrialId};
pub use error::{Error, Result};
pub use estimators::{estimate, fit_bundle, EstimateReport, EstimatorKind, ModelSpec, NuisanceBundle};
pub use inference::{bootstrap_ci, BootstrapConfig, ResamplingScheme};
