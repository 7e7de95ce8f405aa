//! Two-phase training toolkit for class-imbalanced image classification.
//!
//! The pipeline: plan a rebalanced dataset with tiered random over/undersampling,
//! train a small CNN on it (phase 1), then freeze the feature extractor and
//! fine-tune only the classifier head on the original imbalanced data (phase 2),
//! and evaluate everything with per-class and macro-averaged metrics.
//!
//! Modules:
//! - [`nn`]: reverse-mode autodiff engine, op set, Adam.
//! - [`data`]: manifests, stratified splits, augmentation, synthetic long-tail
//!   image generator.
//! - [`sampling`]: tiered oversampling / threshold undersampling planners and
//!   plan application.
//! - [`model`]: configurable residual CNN with a feature/head parameter
//!   partition, freezing, and checkpoints.
//! - [`training`]: seeded training loops with early stopping and the two-phase
//!   orchestration.
//! - [`metrics`]: confusion-matrix evaluation, macro aggregates, deltas.
//! - [`experiment`]: regime-by-seed experiment runner and CSV report writers.
//! - [`serengeti`]: embedded season-9 class-count fixture and reference
//!   per-class statistics used by the planners' exactness tests.
//! - [`cli`]: implementations behind the `twophase` binary's subcommands.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod sampling;
pub mod seeds;
pub mod serengeti;
pub mod training;

pub use error::{Error, Result};

/// Entry point used by the `twophase` binary. Returns the process exit code.
pub fn cli_main() -> i32 {
    eprintln!("cli not wired up yet");
    1
}
