//! Conditional average treatment effect estimation for randomized trials
//! augmented with external data.
//!
//! The central estimator is the QR-learner ([`learners::fit_qr`]): it fits
//! first-stage outcome models on trial and external rows together, weighted by
//! a participation model, and then regresses randomization-aware
//! pseudo-outcomes on the trial. Because the pseudo-outcome is unbiased for the
//! CATE whatever the first stage is, badly matched external data can cost
//! efficiency but not consistency. [`learners::fit_combined`] blends it with the
//! trial-only DR-learner using a cross-validated weight.

pub mod data;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod learners;
pub mod linalg;
pub mod pseudo;
pub mod regressors;
pub mod rng;
pub mod simgen;
pub mod star;

pub use data::{features_from_table, load_csv, CsvSchema, Dataset, Field, FoldPlan, Matrix};
pub use error::{Error, Result};
pub use learners::{CateModel, LambdaFit, LearnerConfig, LearnerKind, Provenance};
pub use pseudo::NuisancePair;
pub use regressors::{FittedRegressor, GbrtConfig, Predict, ProbClassifierSpec, RegressorSpec};
