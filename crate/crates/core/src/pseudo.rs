//! Randomization-aware pseudo-outcomes, their empirical risks and the
//! arm-specific weighted losses that drive the QR first stage.
//!
//! For nuisance functions `η = {h1, h0}` and known trial propensity `e`,
//!
//! ```text
//! ψ(O; η) = (A − e) / (e(1 − e)) · (Y − h_A(X)) + h1(X) − h0(X)
//! ```
//!
//! has conditional mean `τ(x)` in the trial whatever `η` is, provided `η` was
//! not fitted on the rows it is applied to.

use std::sync::Arc;

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::regressors::{FittedClassifier, Predict};

/// The pair `{h1, h0}` feeding [`pseudo_outcome`].
#[derive(Clone)]
pub struct NuisancePair {
    pub h1: Arc<dyn Predict>,
    pub h0: Arc<dyn Predict>,
    pub tag: String,
}

impl std::fmt::Debug for NuisancePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NuisancePair")
            .field("tag", &self.tag)
            .finish()
    }
}

impl NuisancePair {
    pub fn new(h1: Arc<dyn Predict>, h0: Arc<dyn Predict>, tag: impl Into<String>) -> Self {
        Self {
            h1,
            h0,
            tag: tag.into(),
        }
    }

    /// `η = {0, 0}`, the inverse-propensity-weighted pseudo-outcome.
    pub fn zero() -> Self {
        let z: Arc<dyn Predict> = Arc::new(|_: &[f64]| 0.0);
        Self::new(z.clone(), z, "zero")
    }

    /// `η = {m, m}`.
    pub fn shared(m: Arc<dyn Predict>, tag: impl Into<String>) -> Self {
        Self::new(m.clone(), m, tag)
    }

    pub fn arm(&self, a: u8) -> &dyn Predict {
        if a == 1 {
            self.h1.as_ref()
        } else {
            self.h0.as_ref()
        }
    }
}

/// Pseudo-outcomes for a set of trial rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoVector {
    pub rows: Vec<usize>,
    pub values: Vec<f64>,
    pub nuisance: String,
}

/// ψ for one observation.
pub fn pseudo_outcome(x: &[f64], a: u8, y: f64, e: f64, eta: &NuisancePair) -> Result<f64> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::Propensity { row: 0, value: e });
    }
    let h1 = eta.h1.predict_row(x);
    let h0 = eta.h0.predict_row(x);
    let ha = if a == 1 { h1 } else { h0 };
    let af = f64::from(a);
    Ok((af - e) / (e * (1.0 - e)) * (y - ha) + h1 - h0)
}

/// ψ on the listed rows of `ds`. Every listed row must be a trial row.
pub fn pseudo_outcomes(ds: &Dataset, rows: &[usize], eta: &NuisancePair) -> Result<PseudoVector> {
    let values = rows
        .iter()
        .map(|&i| {
            if ds.s[i] != 1 {
                return Err(Error::Config(format!("row {i} is not a trial row")));
            }
            pseudo_outcome(ds.x.row(i), ds.a[i], ds.y[i], ds.e[i], eta).map_err(|e| match e {
                Error::Propensity { value, .. } => Error::Propensity { row: i, value },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PseudoVector {
        rows: rows.to_vec(),
        values,
        nuisance: eta.tag.clone(),
    })
}

/// Mean of `(ψᵢ − τ̃(xᵢ))²`.
pub fn empirical_pseudo_risk(preds: &[f64], psi: &[f64]) -> Result<f64> {
    if preds.len() != psi.len() {
        return Err(Error::Dimension(format!(
            "{} predictions, {} pseudo-outcomes",
            preds.len(),
            psi.len()
        )));
    }
    if psi.is_empty() {
        return Err(Error::Empty("pseudo-risk of zero rows".into()));
    }
    Ok(preds
        .iter()
        .zip(psi)
        .map(|(p, q)| (q - p) * (q - p))
        .sum::<f64>()
        / psi.len() as f64)
}

/// Weight of an arm-`a` row in the first-stage objective:
/// `π̂_a(x) · ((1 − e)/e)^(2a − 1)`.
pub fn arm_weight(pi: f64, e: f64, a: u8) -> f64 {
    let odds = (1.0 - e) / e;
    if a == 1 {
        pi * odds
    } else {
        pi / odds
    }
}

/// `Σ π̂_a(xᵢ) ((1 − eᵢ)/eᵢ)^(2a−1) (yᵢ − h_a(xᵢ))²` over the listed rows,
/// which must all have `A = a`. External rows use the trial propensity stored
/// in their `e` column.
pub fn arm_loss(
    ds: &Dataset,
    rows: &[usize],
    a: u8,
    h_a: &dyn Predict,
    pi_a: &dyn Fn(&[f64]) -> f64,
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyArm {
            arm: a,
            context: "arm loss".into(),
        });
    }
    let mut total = 0.0;
    for &i in rows {
        if ds.a[i] != a {
            return Err(Error::Config(format!(
                "row {i} has a={}, expected {a}",
                ds.a[i]
            )));
        }
        let e = ds.e[i];
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Propensity { row: i, value: e });
        }
        let x = ds.x.row(i);
        let r = ds.y[i] - h_a.predict_row(x);
        total += arm_weight(pi_a(x), e, a) * r * r;
    }
    Ok(total)
}

/// [`arm_loss`] with a fitted participation classifier.
pub fn arm_loss_with_classifier(
    ds: &Dataset,
    rows: &[usize],
    a: u8,
    h_a: &dyn Predict,
    pi_a: &FittedClassifier,
) -> Result<f64> {
    arm_loss(ds, rows, a, h_a, &|x| pi_a.predict_proba_row(x))
}

/// Means of the three terms whose sum is the empirical pseudo-risk:
/// true error `(τ − τ̃)²`, finite-sample error `2(τ − τ̃)(ψ − τ)` and the
/// τ̃-independent noise `(ψ − τ)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskDecomposition {
    pub true_error: f64,
    pub finite_sample_error: f64,
    pub residual: f64,
}

impl RiskDecomposition {
    pub fn total(&self) -> f64 {
        self.true_error + self.finite_sample_error + self.residual
    }
}

pub fn risk_decomposition(tau: &[f64], preds: &[f64], psi: &[f64]) -> Result<RiskDecomposition> {
    if tau.len() != preds.len() || tau.len() != psi.len() {
        return Err(Error::Dimension(
            "risk decomposition inputs differ in length".into(),
        ));
    }
    if tau.is_empty() {
        return Err(Error::Empty("risk decomposition of zero rows".into()));
    }
    let n = tau.len() as f64;
    let (mut t, mut c, mut r) = (0.0, 0.0, 0.0);
    for i in 0..tau.len() {
        let err = tau[i] - preds[i];
        let noise = psi[i] - tau[i];
        t += err * err;
        c += 2.0 * err * noise;
        r += noise * noise;
    }
    Ok(RiskDecomposition {
        true_error: t / n,
        finite_sample_error: c / n,
        residual: r / n,
    })
}

/// Predictions of `model` on the listed rows.
pub fn predict_rows(model: &dyn Predict, x: &Matrix, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| model.predict_row(x.row(i))).collect()
}
