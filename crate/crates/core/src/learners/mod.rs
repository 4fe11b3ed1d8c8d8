//! CATE learners.
//!
//! Two-stage learners share one cross-fitting driver: nuisances are fitted on
//! the rows outside a fold, pseudo-outcomes are computed on that fold's trial
//! rows with the nuisances held fixed, and a final regressor maps covariates
//! to pseudo-outcomes. The per-fold final models are averaged.

mod baselines;
mod combined;
mod kallus;
mod two_stage;

pub use baselines::{fit_ate_constant, fit_t};
pub use combined::{
    combine, fit_combined, lambda_from_predictions, select_lambda_cv, FoldDiagnostic, LambdaFit,
};
pub use kallus::fit_kallus;
pub use two_stage::{
    asiaee_nuisance, cross_fit, dr_nuisance, fit_asiaee, fit_dr, fit_qr, qr_nuisance, Stage1,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::regressors::{FittedRegressor, Predict, ProbClassifierSpec, RegressorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Nuisance regressor (`g_a`, `h*_a`, `μ_a`, T-learner arms).
    pub stage1: RegressorSpec,
    /// Final CATE regressor of the two-stage learners.
    pub stage2: RegressorSpec,
    /// Participation and external-propensity classifier.
    pub classifier: ProbClassifierSpec,
    /// Cross-fitting folds.
    pub folds: usize,
    /// Folds for choosing the combination weight.
    pub combine_folds: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            stage1: RegressorSpec::gbrt_default(),
            // a hair of ridge for conditioning only
            stage2: RegressorSpec::RidgeLinear { penalty: 1e-6 },
            classifier: ProbClassifierSpec::default(),
            folds: 2,
            combine_folds: 3,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.classifier.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 || self.combine_folds < 2 {
            return Err(Error::Config("cross-fitting needs at least 2 folds".into()));
        }
        self.stage1.validate()?;
        self.stage2.validate()?;
        self.classifier.validate()
    }
}

/// Where a fitted model came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub learner: String,
    pub folds: usize,
    pub seed: u64,
    pub lambda: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum CateBody {
    Constant(f64),
    Regressor(FittedRegressor),
    /// `treated(x) − control(x)`.
    Difference {
        treated: FittedRegressor,
        control: FittedRegressor,
    },
    /// Arithmetic mean of the parts, used for cross-fit replicates.
    Average(Vec<CateModel>),
    Sum(Vec<CateModel>),
    /// `λ·qr(x) + (1 − λ)·dr(x)`.
    Blend {
        lambda: f64,
        qr: Box<CateModel>,
        dr: Box<CateModel>,
    },
}

/// A fitted `x ↦ τ̂(x)`.
#[derive(Debug, Clone)]
pub struct CateModel {
    pub body: CateBody,
    pub provenance: Provenance,
}

impl CateModel {
    pub fn new(body: CateBody, provenance: Provenance) -> Self {
        Self { body, provenance }
    }

    pub fn constant(value: f64, learner: &str) -> Self {
        Self::new(
            CateBody::Constant(value),
            Provenance {
                learner: learner.into(),
                ..Default::default()
            },
        )
    }

    /// Per-fold sub-models of a cross-fitted learner.
    pub fn sub_models(&self) -> &[CateModel] {
        match &self.body {
            CateBody::Average(parts) => parts,
            _ => &[],
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = self.provenance.warnings.clone();
        match &self.body {
            CateBody::Average(parts) | CateBody::Sum(parts) => {
                for p in parts {
                    out.extend(p.warnings());
                }
            }
            CateBody::Blend { qr, dr, .. } => {
                out.extend(qr.warnings());
                out.extend(dr.warnings());
            }
            _ => {}
        }
        out
    }
}

impl Predict for CateModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.body {
            CateBody::Constant(c) => *c,
            CateBody::Regressor(r) => r.predict_row(x),
            CateBody::Difference { treated, control } => {
                treated.predict_row(x) - control.predict_row(x)
            }
            CateBody::Average(parts) => {
                parts.iter().map(|p| p.predict_row(x)).sum::<f64>() / parts.len() as f64
            }
            CateBody::Sum(parts) => parts.iter().map(|p| p.predict_row(x)).sum(),
            CateBody::Blend { lambda, qr, dr } => {
                lambda * qr.predict_row(x) + (1.0 - lambda) * dr.predict_row(x)
            }
        }
    }
}

/// Every learner the crate provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Ate,
    Dr,
    T,
    PooledT,
    Asiaee,
    Kallus,
    Qr,
    Combined,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 8] = [
        Self::Ate,
        Self::Dr,
        Self::T,
        Self::PooledT,
        Self::Asiaee,
        Self::Kallus,
        Self::Qr,
        Self::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ate => "ate",
            Self::Dr => "dr",
            Self::T => "t",
            Self::PooledT => "pooled-t",
            Self::Asiaee => "asiaee",
            Self::Kallus => "kallus",
            Self::Qr => "qr",
            Self::Combined => "combined",
        }
    }

    pub fn fit(self, ds: &Dataset, cfg: &LearnerConfig) -> Result<CateModel> {
        match self {
            Self::Ate => fit_ate_constant(ds),
            Self::Dr => fit_dr(ds, cfg),
            Self::T => fit_t(ds, false, cfg),
            Self::PooledT => fit_t(ds, true, cfg),
            Self::Asiaee => fit_asiaee(ds, cfg),
            Self::Kallus => fit_kallus(ds, cfg),
            Self::Qr => fit_qr(ds, cfg),
            Self::Combined => fit_combined(ds, cfg),
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown learner `{s}`")))
    }
}

/// Rows of `ds` restricted to an arm, as a matrix and outcome vector.
pub(crate) fn arm_data(ds: &Dataset, rows: &[usize]) -> (Matrix, Vec<f64>) {
    (
        ds.x.select_rows(rows),
        rows.iter().map(|&i| ds.y[i]).collect(),
    )
}

pub(crate) fn filter_rows(
    ds: &Dataset,
    rows: &[usize],
    s: Option<u8>,
    a: Option<u8>,
) -> Vec<usize> {
    rows.iter()
        .copied()
        .filter(|&i| s.is_none_or(|v| ds.s[i] == v) && a.is_none_or(|v| ds.a[i] == v))
        .collect()
}
