//! Tests for effect heterogeneity and for transportability of the external
//! data.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::data::{make_folds, Dataset};
use crate::error::{Error, Result};
use crate::learners::{asiaee_nuisance, dr_nuisance, qr_nuisance, LearnerKind, Stage1};
use crate::linalg::ols;
use crate::pseudo::pseudo_outcomes;
use crate::regressors::{ProbClassifierSpec, RegressorSpec};

/// Two-sided 0.975 standard normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

pub const LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
    pub rejected: bool,
}

impl TestResult {
    fn normal(method: impl Into<String>, estimate: f64, se: f64) -> Self {
        let stat = estimate / se;
        let p_value = if stat.is_finite() {
            let n = Normal::standard();
            (2.0 * (1.0 - n.cdf(stat.abs()))).clamp(0.0, 1.0)
        } else if estimate == 0.0 || stat.is_nan() {
            1.0
        } else {
            0.0
        };
        Self {
            method: method.into(),
            estimate,
            se,
            ci_lo: estimate - Z_975 * se,
            ci_hi: estimate + Z_975 * se,
            p_value,
            rejected: p_value < LEVEL,
        }
    }
}

fn check_arms(ds: &Dataset, rows: &[usize], context: &str) -> Result<()> {
    for a in [0u8, 1u8] {
        if !rows.iter().any(|&i| ds.a[i] == a) {
            return Err(Error::EmptyArm {
                arm: a,
                context: context.into(),
            });
        }
    }
    Ok(())
}

fn check_z(ds: &Dataset, z: usize) -> Result<()> {
    if z >= ds.d() {
        return Err(Error::Dimension(format!(
            "covariate index {z} with {} covariates",
            ds.d()
        )));
    }
    Ok(())
}

/// OLS of `y` on `(1, a, z, a·z)` with a homoskedastic standard error for the
/// interaction. Uses trial rows, or every row when `pooled`.
pub fn interaction_test_ols(ds: &Dataset, z: usize, pooled: bool) -> Result<TestResult> {
    check_z(ds, z)?;
    let rows = if pooled {
        (0..ds.n()).collect()
    } else {
        ds.trial_rows()
    };
    check_arms(ds, &rows, if pooled { "pooled data" } else { "trial" })?;
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            let a = f64::from(ds.a[i]);
            let zi = ds.x.get(i, z);
            vec![1.0, a, zi, a * zi]
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|&i| ds.y[i]).collect();
    let fit = ols(&design, &y)?;
    let method = if pooled { "ols-pooled" } else { "ols-trial" };
    Ok(TestResult::normal(method, fit.coef[3], fit.se(3)))
}

/// Two-fold pseudo-outcome test of the slope of `τ` in covariate `z`.
///
/// Nuisances follow the named learner's first stage with linear regressors.
/// Each fold's pseudo-outcomes are regressed on `(1, z)`; the two slopes are
/// averaged and their standard errors combined as `sqrt((se₁² + se₂²)/4)`.
pub fn interaction_test_pseudo(
    ds: &Dataset,
    learner: LearnerKind,
    z: usize,
    classifier: &ProbClassifierSpec,
    seed: u64,
) -> Result<TestResult> {
    check_z(ds, z)?;
    let linear = RegressorSpec::Linear;
    let dr;
    let qr;
    let asiaee;
    let (stage1, data): (&Stage1<'_>, Dataset) = match learner {
        LearnerKind::Dr => {
            dr = dr_nuisance(&linear);
            (&dr, ds.trial_only())
        }
        LearnerKind::Qr => {
            qr = qr_nuisance(&linear, classifier);
            (&qr, ds.clone())
        }
        LearnerKind::Asiaee => {
            asiaee = asiaee_nuisance(&linear);
            (&asiaee, ds.clone())
        }
        other => {
            return Err(Error::Config(format!(
                "no pseudo-outcome test for learner `{other}`"
            )));
        }
    };
    let plan = make_folds(&data, 2, seed)?;
    let mut slopes = [0.0; 2];
    let mut ses = [0.0; 2];
    for fold in 0..2 {
        let train = plan.fold_rows(fold);
        let apply: Vec<usize> = plan
            .fold_rows(1 - fold)
            .into_iter()
            .filter(|&i| data.s[i] == 1)
            .collect();
        check_arms(&data, &apply, &format!("test fold {}", 1 - fold))?;
        let (eta, _) = stage1(&data, &train)?;
        let psi = pseudo_outcomes(&data, &apply, &eta)?;
        let design: Vec<Vec<f64>> = apply.iter().map(|&i| vec![1.0, data.x.get(i, z)]).collect();
        let fit = ols(&design, &psi.values)?;
        slopes[fold] = fit.coef[1];
        ses[fold] = fit.se(1);
    }
    let estimate = 0.5 * (slopes[0] + slopes[1]);
    let se = (0.25 * (ses[0] * ses[0] + ses[1] * ses[1])).sqrt();
    Ok(TestResult::normal(
        format!("pseudo-{learner}"),
        estimate,
        se,
    ))
}

/// Partial correlation of `y` and `s` given `(x, a)`, tested against a
/// Student-t with `n − d − 3` degrees of freedom. The interval is
/// `r ± t_crit·sqrt((1 − r²)/df)`, so it excludes zero exactly when `p < 0.05`.
pub fn transportability_test(ds: &Dataset) -> Result<TestResult> {
    let n = ds.n();
    let d = ds.d();
    if n <= d + 3 {
        return Err(Error::Empty(format!(
            "{n} rows is too few for {d} covariates"
        )));
    }
    let design: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(d + 2);
            row.push(1.0);
            row.extend_from_slice(ds.x.row(i));
            row.push(f64::from(ds.a[i]));
            row
        })
        .collect();
    let ry = ols(&design, &ds.y)?.residuals;
    let s: Vec<f64> = ds.s.iter().map(|&v| f64::from(v)).collect();
    let rs = ols(&design, &s)?.residuals;
    let r = pearson(&ry, &rs);
    let df = (n - d - 3) as f64;
    let tdist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Config(e.to_string()))?;
    let t_crit = tdist.inverse_cdf(1.0 - LEVEL / 2.0);
    let one_minus = (1.0 - r * r).max(0.0);
    let se = (one_minus / df).sqrt();
    let p_value = if one_minus == 0.0 {
        0.0
    } else {
        let t = r * (df / one_minus).sqrt();
        (2.0 * (1.0 - tdist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        method: "partial-correlation".into(),
        estimate: r,
        se,
        ci_lo: r - t_crit * se,
        ci_hi: r + t_crit * se,
        p_value,
        rejected: p_value < LEVEL,
    })
}

/// Pearson correlation; zero when either vector has no spread.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    // residuals of an exact fit are rounding noise, not signal
    let tiny = 1e-24 * n;
    if sxx <= tiny || syy <= tiny {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}
