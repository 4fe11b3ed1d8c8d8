use super::{arm_data, filter_rows, CateBody, CateModel, LearnerConfig, Provenance};
use crate::data::{make_folds_for_sources, Dataset};
use crate::error::{Error, Result};
use crate::pseudo::NuisancePair;
use crate::regressors::{fit_logistic, Predict, RegressorSpec};

/// External CATE `ω̂` plus a linear bias correction `b̂` fitted on the trial.
///
/// `ω̂` is a cross-fitted DR-learner on the external rows with an estimated
/// external propensity. `b̂` regresses `ψ(O; {0,0}) − ω̂(x)` on the trial rows
/// with an intercept, and `τ̂ = ω̂ + b̂`.
pub fn fit_kallus(ds: &Dataset, cfg: &LearnerConfig) -> Result<CateModel> {
    cfg.validate()?;
    for s in [0u8, 1u8] {
        for a in [0u8, 1u8] {
            if ds.rows_where(Some(s), Some(a)).is_empty() {
                return Err(Error::EmptyArm {
                    arm: a,
                    context: if s == 1 { "trial" } else { "external data" }.into(),
                });
            }
        }
    }
    let ext_rows = ds.external_rows();
    let ext = ds.subset(&ext_rows);
    let plan = make_folds_for_sources(&ext.s, cfg.folds, cfg.seed)?;
    let mut parts = Vec::with_capacity(plan.k);
    let mut warnings = Vec::new();
    for fold in 0..plan.k {
        let train = plan.train_rows(fold);
        let apply = plan.fold_rows(fold);
        let xtr = ext.x.select_rows(&train);
        let atr: Vec<u8> = train.iter().map(|&i| ext.a[i]).collect();
        let propensity = fit_logistic(&xtr, &atr, &cfg.classifier)?;
        if !propensity.converged {
            warnings.push(format!("fold {fold}: external propensity did not converge"));
        }
        let mut arms = Vec::with_capacity(2);
        for a in [1u8, 0u8] {
            let rows = filter_rows(&ext, &train, None, Some(a));
            if rows.is_empty() {
                return Err(Error::EmptyArm {
                    arm: a,
                    context: "external training fold".into(),
                });
            }
            let (x, y) = arm_data(&ext, &rows);
            arms.push(cfg.stage1.fit_unweighted(&x, &y)?);
        }
        let mu0 = arms.pop().expect("two arms");
        let mu1 = arms.pop().expect("two arms");
        let psi: Vec<f64> = apply
            .iter()
            .map(|&i| {
                let x = ext.x.row(i);
                let e = propensity.predict_proba_row(x);
                let (m1, m0) = (mu1.predict_row(x), mu0.predict_row(x));
                let ma = if ext.a[i] == 1 { m1 } else { m0 };
                (f64::from(ext.a[i]) - e) / (e * (1.0 - e)) * (ext.y[i] - ma) + m1 - m0
            })
            .collect();
        let fitted = cfg
            .stage2
            .fit_unweighted(&ext.x.select_rows(&apply), &psi)?;
        parts.push(CateModel::new(
            CateBody::Regressor(fitted),
            Provenance {
                learner: format!("kallus-external/fold{fold}"),
                folds: plan.k,
                seed: cfg.seed,
                ..Default::default()
            },
        ));
    }
    let omega = CateModel::new(
        CateBody::Average(parts),
        Provenance {
            learner: "kallus-external".into(),
            folds: plan.k,
            seed: cfg.seed,
            ..Default::default()
        },
    );

    let trial_rows = ds.trial_rows();
    let zero = NuisancePair::zero();
    let target: Vec<f64> = trial_rows
        .iter()
        .map(|&i| {
            let x = ds.x.row(i);
            crate::pseudo::pseudo_outcome(x, ds.a[i], ds.y[i], ds.e[i], &zero)
                .map(|p| p - omega.predict_row(x))
        })
        .collect::<Result<_>>()?;
    let bias = RegressorSpec::Linear.fit_unweighted(&ds.x.select_rows(&trial_rows), &target)?;
    if bias.warning() {
        warnings.push("bias regression needed diagonal jitter".into());
    }
    let bias = CateModel::new(
        CateBody::Regressor(bias),
        Provenance {
            learner: "kallus-bias".into(),
            ..Default::default()
        },
    );
    Ok(CateModel::new(
        CateBody::Sum(vec![omega, bias]),
        Provenance {
            learner: "kallus".into(),
            folds: plan.k,
            seed: cfg.seed,
            warnings,
            ..Default::default()
        },
    ))
}
