use super::{fit_dr, fit_qr, CateBody, CateModel, LearnerConfig, Provenance};
use crate::data::{make_folds_for_sources, Dataset};
use crate::error::{Error, Result};
use crate::pseudo::{pseudo_outcomes, NuisancePair};
use crate::regressors::Predict;

// keeps the weight-selection folds independent of the cross-fitting folds
const COMBINE_SEED_SALT: u64 = 0xC0B1_7E55_A5A5_0001;

/// Sums over one held-out fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldDiagnostic {
    pub fold: usize,
    pub n: usize,
    /// `Σ (ψ − u)²` of the QR predictions.
    pub sse_qr: f64,
    /// `Σ (ψ − v)²` of the DR predictions.
    pub sse_dr: f64,
}

/// The cross-validated pseudo-risk `R(λ) = a_q λ² + b_q λ + c_q` and its
/// minimiser on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaFit {
    pub lambda: f64,
    pub a_q: f64,
    pub b_q: f64,
    pub c_q: f64,
    pub folds: Vec<FoldDiagnostic>,
    pub cv_folds: usize,
}

impl LambdaFit {
    pub fn risk(&self, lambda: f64) -> f64 {
        self.a_q * lambda * lambda + self.b_q * lambda + self.c_q
    }
}

/// Closed-form weight from held-out QR predictions `u`, DR predictions `v` and
/// pseudo-outcomes `psi`. With `A_q = 0` the DR learner wins (`λ = 0`).
pub fn lambda_from_predictions(psi: &[f64], u: &[f64], v: &[f64]) -> Result<LambdaFit> {
    if psi.len() != u.len() || psi.len() != v.len() {
        return Err(Error::Dimension(format!(
            "{} pseudo-outcomes, {} and {} predictions",
            psi.len(),
            u.len(),
            v.len()
        )));
    }
    if psi.is_empty() {
        return Err(Error::Empty("no held-out predictions".into()));
    }
    let n = psi.len() as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 0..psi.len() {
        let du = u[i] - v[i];
        let r = psi[i] - v[i];
        a += du * du;
        b -= 2.0 * du * r;
        c += r * r;
    }
    let (a, b, c) = (a / n, b / n, c / n);
    let lambda = if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(LambdaFit {
        lambda,
        a_q: a,
        b_q: b,
        c_q: c,
        folds: Vec::new(),
        cv_folds: 1,
    })
}

/// Chooses `λ` by `k`-fold cross-validation over the trial rows. In every
/// fold both learners are refitted without the held-out trial rows (external
/// rows are always kept) and scored against `ψ(O; {0, 0})`.
pub fn select_lambda_cv(
    ds: &Dataset,
    qr: &dyn Fn(&Dataset) -> Result<CateModel>,
    dr: &dyn Fn(&Dataset) -> Result<CateModel>,
    k: usize,
    seed: u64,
) -> Result<LambdaFit> {
    if k < 2 {
        return Err(Error::Config(
            "weight selection needs at least 2 folds".into(),
        ));
    }
    let trial = ds.trial_rows();
    let external = ds.external_rows();
    let trial_s = vec![1u8; trial.len()];
    let plan = make_folds_for_sources(&trial_s, k, seed ^ COMBINE_SEED_SALT)?;
    let zero = NuisancePair::zero();
    let (mut psi, mut u, mut v) = (Vec::new(), Vec::new(), Vec::new());
    let mut diagnostics = Vec::with_capacity(k);
    for fold in 0..k {
        let held: Vec<usize> = plan.fold_rows(fold).into_iter().map(|j| trial[j]).collect();
        for a in [0u8, 1u8] {
            if !held.iter().any(|&i| ds.a[i] == a) {
                return Err(Error::EmptyArm {
                    arm: a,
                    context: format!("weight-selection fold {fold}"),
                });
            }
        }
        let mut keep: Vec<usize> = plan
            .train_rows(fold)
            .into_iter()
            .map(|j| trial[j])
            .collect();
        keep.extend_from_slice(&external);
        keep.sort_unstable();
        let train = ds.subset(&keep);
        let qr_model = qr(&train)?;
        let dr_model = dr(&train)?;
        let p = pseudo_outcomes(ds, &held, &zero)?;
        let (mut sse_qr, mut sse_dr) = (0.0, 0.0);
        for (&i, &q) in held.iter().zip(&p.values) {
            let x = ds.x.row(i);
            let (ui, vi) = (qr_model.predict_row(x), dr_model.predict_row(x));
            sse_qr += (q - ui) * (q - ui);
            sse_dr += (q - vi) * (q - vi);
            psi.push(q);
            u.push(ui);
            v.push(vi);
        }
        diagnostics.push(FoldDiagnostic {
            fold,
            n: held.len(),
            sse_qr,
            sse_dr,
        });
    }
    let mut fit = lambda_from_predictions(&psi, &u, &v)?;
    fit.folds = diagnostics;
    fit.cv_folds = k;
    Ok(fit)
}

/// `λ̂·τ̂_QR + (1 − λ̂)·τ̂_DR` with both learners fitted on all of `ds`.
pub fn fit_combined(ds: &Dataset, cfg: &LearnerConfig) -> Result<CateModel> {
    cfg.validate()?;
    let qr = fit_qr(ds, cfg)?;
    let dr = fit_dr(ds, cfg)?;
    let fit = select_lambda_cv(
        ds,
        &|d: &Dataset| fit_qr(d, cfg),
        &|d: &Dataset| fit_dr(d, cfg),
        cfg.combine_folds,
        cfg.seed,
    )?;
    Ok(combine(qr, dr, fit.lambda, cfg))
}

/// Blends two fitted models with a given weight.
pub fn combine(qr: CateModel, dr: CateModel, lambda: f64, cfg: &LearnerConfig) -> CateModel {
    CateModel::new(
        CateBody::Blend {
            lambda,
            qr: Box::new(qr),
            dr: Box::new(dr),
        },
        Provenance {
            learner: "combined".into(),
            folds: cfg.folds,
            seed: cfg.seed,
            lambda: Some(lambda),
            warnings: Vec::new(),
        },
    )
}
