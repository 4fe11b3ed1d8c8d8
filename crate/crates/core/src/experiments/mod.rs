//! Monte Carlo experiment drivers and their CSV outputs.
//!
//! Replications run on a rayon pool. Each replication draws from its own
//! random streams and results are collected in replication order before any
//! aggregation, so outputs do not depend on the number of threads.

mod power;
mod rmse;
mod star;

pub use power::{
    run_power_experiment, PowerExperiment, PowerMethod, PowerOutput, PowerRow, PowerValue, Setting,
    DEFAULT_BETA,
};
pub use rmse::{run_rmse_experiment, RmseExperiment, RmseOutput, RmseRow, RmseValue};
pub use star::{
    overlap_histogram, run_star_experiment, HistogramRow, StarExperiment, StarOutput, StarRow,
    StarSource, StarValue,
};

use std::path::Path;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pseudo::{pseudo_outcome, NuisancePair};
use crate::regressors::Predict;
use crate::rng::{stream_id, Role};
use crate::simgen::LabeledDraw;

/// Root mean squared error against the true CATE over the trial rows of an
/// evaluation draw.
pub fn rmse_vs_truth(model: &dyn Predict, eval: &LabeledDraw) -> Result<f64> {
    let ds = &eval.dataset;
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..ds.n() {
        if ds.s[i] == 1 {
            let err = eval.tau[i] - model.predict_row(ds.x.row(i));
            sum += err * err;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Empty("evaluation draw has no trial rows".into()));
    }
    Ok((sum / n as f64).sqrt())
}

/// Root mean squared distance between predictions and `ψ(O; {0, 0})` over the
/// trial rows of a held-out set.
pub fn rmse_vs_proxy(model: &dyn Predict, heldout: &Dataset) -> Result<f64> {
    let zero = NuisancePair::zero();
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..heldout.n() {
        if heldout.s[i] != 1 {
            continue;
        }
        let x = heldout.x.row(i);
        let psi =
            pseudo_outcome(x, heldout.a[i], heldout.y[i], heldout.e[i], &zero).map_err(|_| {
                Error::Propensity {
                    row: i,
                    value: heldout.e[i],
                }
            })?;
        let err = psi - model.predict_row(x);
        sum += err * err;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("held-out set has no trial rows".into()));
    }
    Ok((sum / n as f64).sqrt())
}

/// Mean and `sd / √R` of the successful replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub r: usize,
    pub failed: usize,
}

pub fn summarize(values: &[Option<f64>]) -> Summary {
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    let r = ok.len();
    let failed = values.len() - r;
    if r == 0 {
        return Summary {
            mean: None,
            se: None,
            r,
            failed,
        };
    }
    let mean = ok.iter().sum::<f64>() / r as f64;
    let se = (r > 1).then(|| {
        let var = ok.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
        (var / r as f64).sqrt()
    });
    Summary {
        mean: Some(mean),
        se,
        r,
        failed,
    }
}

/// Learner seed for one replication.
pub fn replication_seed(seed: u64, replication: u64) -> u64 {
    stream_id(replication, Role::Learner, seed)
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub(crate) fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Writes rows with a header taken from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn validate_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::Config("replication count must be at least 1".into()));
    }
    Ok(())
}
