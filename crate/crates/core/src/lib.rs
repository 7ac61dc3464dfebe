//! Temporal evaluation of timestamped binary predictions.
//!
//! Instance-based metrics (accuracy, error counts, AP, AU-ROC) cannot tell
//! apart two predictions that make the same number of mistakes at different
//! times. This crate measures *when* errors happen: the volatility-cluster
//! statistic ([`vcs`]) compares nearest-neighbour gaps between errors with
//! gaps from uniformly drawn reference times, and [`soft_vca`] provides a
//! differentiable version usable as a training penalty.
//!
//! Modules:
//! - [`event_stream`]: parsing, validation, chronological splits, thresholding.
//! - [`instance_metrics`]: Hamming disagreement, mismatch-based metrics, AP, AU-ROC.
//! - [`vcs`]: the cluster statistic with reproducible substreams.
//! - [`soft_vca`]: soft-min distances, weighted soft statistic, penalty, gradients.
//! - [`pattern_gen`]: synthetic random/clustered/regular error patterns and a drift dataset.
//! - [`toy_trainer`]: logistic model trained with cross-entropy plus the penalty.
//! - [`benchmark`]: paired baseline vs penalised runs on the drift dataset.
//! - [`gradcheck`]: finite-difference verification of every analytic gradient.
//! - [`report`]: JSON reports, density CSV and SVG density strips.

pub mod benchmark;
pub mod error;
pub mod event_stream;
pub mod gradcheck;
pub mod instance_metrics;
pub mod pattern_gen;
pub mod report;
pub mod rng;
pub mod soft_vca;
pub mod toy_trainer;
pub mod vcs;

pub use error::{Error, Result};
