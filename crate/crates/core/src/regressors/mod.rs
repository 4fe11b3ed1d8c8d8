//! Supervised learners behind one fit/predict contract.
//!
//! Every regressor accepts per-sample weights so the same code path serves
//! plain least squares, the participation-weighted nuisance objective and
//! the final CATE regressions.

mod gbrt;
mod linear;
mod logistic;

pub use gbrt::{fit_gbrt, GbrtConfig, GbrtModel, Tree, TreeNode};
pub use linear::{fit_weighted_linear, LinearModel};
pub use logistic::{
    fit_logistic, log_loss_gradient, penalized_objective, FittedClassifier, ProbClassifierSpec,
};

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

/// Anything that maps a covariate row to a real number.
pub trait Predict: Send + Sync {
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }
}

impl<F> Predict for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict_row(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Which regressor to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegressorSpec {
    Linear,
    RidgeLinear { penalty: f64 },
    Gbrt(GbrtConfig),
}

impl RegressorSpec {
    pub fn gbrt_default() -> Self {
        Self::Gbrt(GbrtConfig::default())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Linear => Ok(()),
            Self::RidgeLinear { penalty } if *penalty >= 0.0 && penalty.is_finite() => Ok(()),
            Self::RidgeLinear { penalty } => Err(Error::Config(format!(
                "ridge penalty must be >= 0, got {penalty}"
            ))),
            Self::Gbrt(cfg) => cfg.validate(),
        }
    }

    /// Fits on `(x, y)` with non-negative sample weights.
    pub fn fit(&self, x: &Matrix, y: &[f64], w: &[f64]) -> Result<FittedRegressor> {
        self.validate()?;
        Ok(match self {
            Self::Linear => FittedRegressor::Linear(fit_weighted_linear(x, y, w, 0.0)?),
            Self::RidgeLinear { penalty } => {
                FittedRegressor::Linear(fit_weighted_linear(x, y, w, *penalty)?)
            }
            Self::Gbrt(cfg) => FittedRegressor::Gbrt(fit_gbrt(x, y, w, cfg)?),
        })
    }

    pub fn fit_unweighted(&self, x: &Matrix, y: &[f64]) -> Result<FittedRegressor> {
        self.fit(x, y, &vec![1.0; y.len()])
    }
}

/// A fitted regressor.
#[derive(Debug, Clone)]
pub enum FittedRegressor {
    Linear(LinearModel),
    Gbrt(GbrtModel),
    Constant(f64),
}

impl FittedRegressor {
    /// True when the fit needed a numerical fallback.
    pub fn warning(&self) -> bool {
        match self {
            Self::Linear(m) => m.jitter > 0.0,
            _ => false,
        }
    }
}

impl Predict for FittedRegressor {
    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear(m) => m.predict_row(x),
            Self::Gbrt(m) => m.predict_row(x),
            Self::Constant(c) => *c,
        }
    }
}

pub(crate) fn check_weighted_inputs(x: &Matrix, y: &[f64], w: &[f64]) -> Result<f64> {
    if x.nrows() != y.len() || y.len() != w.len() {
        return Err(Error::Dimension(format!(
            "x has {} rows, y {}, w {}",
            x.nrows(),
            y.len(),
            w.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Empty("no training rows".into()));
    }
    let mut total = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if !(wi >= 0.0 && wi.is_finite()) {
            return Err(Error::Config(format!(
                "weight {i} is {wi}, must be finite and >= 0"
            )));
        }
        total += wi;
    }
    if total <= 0.0 {
        return Err(Error::Config("sample weights sum to zero".into()));
    }
    Ok(total)
}
