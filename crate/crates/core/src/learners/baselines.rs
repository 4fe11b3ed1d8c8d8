use super::{arm_data, CateBody, CateModel, LearnerConfig, Provenance};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// `τ̂(x) = ĝ1(x) − ĝ0(x)` with arm regressions on trial rows, or on all rows
/// when `pooled`.
pub fn fit_t(ds: &Dataset, pooled: bool, cfg: &LearnerConfig) -> Result<CateModel> {
    cfg.stage1.validate()?;
    let source = if pooled { None } else { Some(1) };
    let mut fits = Vec::with_capacity(2);
    for a in [1u8, 0u8] {
        let rows = ds.rows_where(source, Some(a));
        if rows.is_empty() {
            return Err(Error::EmptyArm {
                arm: a,
                context: if pooled { "pooled data" } else { "trial" }.into(),
            });
        }
        let (x, y) = arm_data(ds, &rows);
        fits.push(cfg.stage1.fit_unweighted(&x, &y)?);
    }
    let control = fits.pop().expect("two arms");
    let treated = fits.pop().expect("two arms");
    let mut warnings = Vec::new();
    if treated.warning() || control.warning() {
        warnings.push("arm regression needed diagonal jitter".into());
    }
    Ok(CateModel::new(
        CateBody::Difference { treated, control },
        Provenance {
            learner: if pooled { "pooled-t" } else { "t" }.into(),
            seed: cfg.seed,
            warnings,
            ..Default::default()
        },
    ))
}

/// Difference in trial arm means as a constant CATE.
pub fn fit_ate_constant(ds: &Dataset) -> Result<CateModel> {
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for i in 0..ds.n() {
        if ds.s[i] == 1 {
            let a = usize::from(ds.a[i]);
            sums[a] += ds.y[i];
            counts[a] += 1;
        }
    }
    for a in [0u8, 1u8] {
        if counts[usize::from(a)] == 0 {
            return Err(Error::EmptyArm {
                arm: a,
                context: "trial".into(),
            });
        }
    }
    let ate = sums[1] / counts[1] as f64 - sums[0] / counts[0] as f64;
    Ok(CateModel::constant(ate, "ate"))
}
