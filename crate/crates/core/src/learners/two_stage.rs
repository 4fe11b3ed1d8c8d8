use std::sync::Arc;

use log::warn;

use super::{arm_data, filter_rows, CateBody, CateModel, LearnerConfig, Provenance};
use crate::data::{make_folds, Dataset};
use crate::error::{Error, Result};
use crate::pseudo::{arm_weight, pseudo_outcomes, NuisancePair};
use crate::regressors::{
    fit_logistic, FittedClassifier, Predict, ProbClassifierSpec, RegressorSpec,
};

/// First-stage recipe: fits `η` on the given rows of the dataset and reports
/// any warnings raised on the way.
pub type Stage1<'a> = dyn Fn(&Dataset, &[usize]) -> Result<(NuisancePair, Vec<String>)> + Sync + 'a;

/// Cross-fits a two-stage learner over `cfg.folds` source-stratified folds.
pub fn cross_fit(
    ds: &Dataset,
    cfg: &LearnerConfig,
    learner: &str,
    stage1: &Stage1<'_>,
) -> Result<CateModel> {
    cfg.validate()?;
    let plan = make_folds(ds, cfg.folds, cfg.seed)?;
    let mut parts = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let train = plan.train_rows(fold);
        let apply = filter_rows(ds, &plan.fold_rows(fold), Some(1), None);
        if apply.is_empty() {
            return Err(Error::Empty(format!("fold {fold} has no trial rows")));
        }
        let (eta, mut warnings) = stage1(ds, &train)?;
        let psi = pseudo_outcomes(ds, &apply, &eta)?;
        let x = ds.x.select_rows(&apply);
        let fitted = cfg.stage2.fit_unweighted(&x, &psi.values)?;
        if fitted.warning() {
            warnings.push(format!(
                "fold {fold}: final regression needed diagonal jitter"
            ));
        }
        parts.push(CateModel::new(
            CateBody::Regressor(fitted),
            Provenance {
                learner: format!("{learner}/fold{fold}"),
                folds: plan.k,
                seed: cfg.seed,
                warnings,
                ..Default::default()
            },
        ));
    }
    Ok(CateModel::new(
        CateBody::Average(parts),
        Provenance {
            learner: learner.into(),
            folds: plan.k,
            seed: cfg.seed,
            ..Default::default()
        },
    ))
}

fn fit_arm(
    spec: &RegressorSpec,
    ds: &Dataset,
    rows: &[usize],
    w: Option<&[f64]>,
) -> Result<Arc<dyn Predict>> {
    let (x, y) = arm_data(ds, rows);
    let fitted = match w {
        Some(w) => spec.fit(&x, &y, w)?,
        None => spec.fit_unweighted(&x, &y)?,
    };
    Ok(Arc::new(fitted))
}

/// `g_a = E[Y | X, A=a, S=1]` on the trial rows of the training part.
pub fn dr_nuisance(
    stage1: &RegressorSpec,
) -> impl Fn(&Dataset, &[usize]) -> Result<(NuisancePair, Vec<String>)> + Sync + '_ {
    move |ds: &Dataset, train: &[usize]| {
        let mut arms = Vec::with_capacity(2);
        for a in [1u8, 0u8] {
            let rows = filter_rows(ds, train, Some(1), Some(a));
            if rows.is_empty() {
                return Err(Error::EmptyArm {
                    arm: a,
                    context: "trial training fold".into(),
                });
            }
            arms.push(fit_arm(stage1, ds, &rows, None)?);
        }
        let h0 = arms.pop().expect("two arms");
        let h1 = arms.pop().expect("two arms");
        Ok((NuisancePair::new(h1, h0, "dr"), Vec::new()))
    }
}

/// Participation model `π̂_a = Pr(S=1 | X, A=a)` over pooled arm-`a` rows.
fn participation(
    ds: &Dataset,
    rows: &[usize],
    spec: &ProbClassifierSpec,
    a: u8,
    warnings: &mut Vec<String>,
) -> Result<FittedClassifier> {
    let labels: Vec<u8> = rows.iter().map(|&i| ds.s[i]).collect();
    let n_trial = labels.iter().filter(|&&s| s == 1).count();
    if n_trial == 0 || n_trial == labels.len() {
        let msg = format!(
            "arm {a}: only {} rows present, participation fixed at the clip bound",
            if n_trial == 0 { "external" } else { "trial" }
        );
        warn!("{msg}");
        warnings.push(msg);
        let p = if n_trial == 0 { 0.0 } else { 1.0 };
        return Ok(FittedClassifier::constant(p, spec.p_min));
    }
    let x = ds.x.select_rows(rows);
    let fitted = fit_logistic(&x, &labels, spec)?;
    if !fitted.converged {
        warnings.push(format!("arm {a}: participation model did not converge"));
    }
    Ok(fitted)
}

/// QR first stage: `ĥ*_a` minimises the participation- and odds-weighted
/// squared error over pooled arm-`a` rows of the training part.
pub fn qr_nuisance<'a>(
    stage1: &'a RegressorSpec,
    classifier: &'a ProbClassifierSpec,
) -> impl Fn(&Dataset, &[usize]) -> Result<(NuisancePair, Vec<String>)> + Sync + 'a {
    move |ds: &Dataset, train: &[usize]| {
        let mut warnings = Vec::new();
        let mut arms = Vec::with_capacity(2);
        for a in [1u8, 0u8] {
            let rows = filter_rows(ds, train, None, Some(a));
            if rows.is_empty() {
                return Err(Error::EmptyArm {
                    arm: a,
                    context: "QR training fold".into(),
                });
            }
            let pi = participation(ds, &rows, classifier, a, &mut warnings)?;
            let w = rows
                .iter()
                .map(|&i| {
                    let e = ds.e[i];
                    if !(e > 0.0 && e < 1.0) {
                        return Err(Error::Propensity { row: i, value: e });
                    }
                    Ok(arm_weight(pi.predict_proba_row(ds.x.row(i)), e, a))
                })
                .collect::<Result<Vec<f64>>>()?;
            arms.push(fit_arm(stage1, ds, &rows, Some(&w))?);
        }
        let h0 = arms.pop().expect("two arms");
        let h1 = arms.pop().expect("two arms");
        Ok((NuisancePair::new(h1, h0, "qr"), warnings))
    }
}

/// The trial propensity when it is the same for every trial row.
pub(crate) fn constant_trial_propensity(ds: &Dataset) -> Result<f64> {
    let mut it =
        ds.s.iter()
            .zip(&ds.e)
            .filter(|(s, _)| **s == 1)
            .map(|(_, e)| *e);
    let first = it
        .next()
        .ok_or_else(|| Error::Empty("no trial rows".into()))?;
    if it.any(|e| e != first) {
        return Err(Error::Config(
            "external outcome blending needs a constant trial propensity".into(),
        ));
    }
    Ok(first)
}

/// `η = {m*, m*}` with `m*(x) = e·μ̂0(x) + (1 − e)·μ̂1(x)` and
/// `μ̂_a = E[Y | X, A=a, S=0]` fitted on the external rows of the training part.
pub fn asiaee_nuisance(
    stage1: &RegressorSpec,
) -> impl Fn(&Dataset, &[usize]) -> Result<(NuisancePair, Vec<String>)> + Sync + '_ {
    move |ds: &Dataset, train: &[usize]| {
        let e = constant_trial_propensity(ds)?;
        let mut arms = Vec::with_capacity(2);
        for a in [1u8, 0u8] {
            let rows = filter_rows(ds, train, Some(0), Some(a));
            if rows.is_empty() {
                return Err(Error::EmptyArm {
                    arm: a,
                    context: "external training fold".into(),
                });
            }
            arms.push(fit_arm(stage1, ds, &rows, None)?);
        }
        let mu0 = arms.pop().expect("two arms");
        let mu1 = arms.pop().expect("two arms");
        let m: Arc<dyn Predict> =
            Arc::new(move |x: &[f64]| e * mu0.predict_row(x) + (1.0 - e) * mu1.predict_row(x));
        Ok((NuisancePair::shared(m, "asiaee"), Vec::new()))
    }
}

/// Trial-only DR-learner. External rows, if any, are ignored.
pub fn fit_dr(ds: &Dataset, cfg: &LearnerConfig) -> Result<CateModel> {
    let trial = ds.trial_only();
    cross_fit(&trial, cfg, "dr", &dr_nuisance(&cfg.stage1))
}

/// QR-learner over trial and external rows.
pub fn fit_qr(ds: &Dataset, cfg: &LearnerConfig) -> Result<CateModel> {
    cross_fit(ds, cfg, "qr", &qr_nuisance(&cfg.stage1, &cfg.classifier))
}

/// Randomization-aware learner with external outcome models blended by the
/// trial propensity.
pub fn fit_asiaee(ds: &Dataset, cfg: &LearnerConfig) -> Result<CateModel> {
    for a in [0u8, 1u8] {
        if ds.rows_where(Some(0), Some(a)).is_empty() {
            return Err(Error::EmptyArm {
                arm: a,
                context: "external data".into(),
            });
        }
    }
    cross_fit(ds, cfg, "asiaee", &asiaee_nuisance(&cfg.stage1))
}
