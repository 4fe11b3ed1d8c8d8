use std::path::PathBuf;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{replication_seed, rmse_vs_proxy, summarize, validate_reps, with_pool};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{LearnerConfig, LearnerKind};
use crate::regressors::{fit_logistic, ProbClassifierSpec};
use crate::rng::{stream, Role};
use crate::star::{
    build_star_partition, subsample, synthetic_star, StarPartition, StarRaw, SyntheticStar,
};

/// Where the extract comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StarSource {
    File(PathBuf),
    Synthetic(SyntheticStar),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StarExperiment {
    /// STAR extract; the synthetic generator is used when absent.
    pub input: Option<PathBuf>,
    pub synthetic: SyntheticStar,
    pub learners: Vec<LearnerKind>,
    pub n1: usize,
    pub n0: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub partition_seed: u64,
    pub trial_propensity: f64,
    /// Fraction of each trial subsample held out for the proxy error.
    pub holdout: f64,
    pub learner: LearnerConfig,
    pub histogram_bins: usize,
}

impl Default for StarExperiment {
    fn default() -> Self {
        Self {
            input: None,
            synthetic: SyntheticStar::default(),
            learners: vec![
                LearnerKind::Dr,
                LearnerKind::T,
                LearnerKind::PooledT,
                LearnerKind::Qr,
                LearnerKind::Combined,
            ],
            n1: 1000,
            n0: vec![100, 500, 1000, 2000],
            reps: 50,
            seed: 0,
            partition_seed: 0,
            trial_propensity: 0.5,
            holdout: 0.3,
            learner: LearnerConfig::default(),
            histogram_bins: 20,
        }
    }
}

impl StarExperiment {
    pub fn source(&self) -> StarSource {
        match &self.input {
            Some(p) => StarSource::File(p.clone()),
            None => StarSource::Synthetic(self.synthetic.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_reps(self.reps)?;
        if self.learners.is_empty() || self.n0.is_empty() {
            return Err(Error::Config(
                "learner list and n0 sweep must be nonempty".into(),
            ));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::Config(format!(
                "holdout fraction {} outside (0, 1)",
                self.holdout
            )));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        self.learner.validate()
    }

    pub fn load(&self) -> Result<StarRaw> {
        match self.source() {
            StarSource::File(p) => StarRaw::read(&p),
            StarSource::Synthetic(cfg) => synthetic_star(&cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarRow {
    pub learner: String,
    pub n1: usize,
    pub n0: usize,
    pub mean_rmse: Option<f64>,
    pub se: Option<f64>,
    #[serde(rename = "R")]
    pub r: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub trial_count: usize,
    pub external_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarValue {
    pub learner: LearnerKind,
    pub n0: usize,
    pub replication: u64,
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StarOutput {
    pub rows: Vec<StarRow>,
    pub values: Vec<StarValue>,
    pub histogram: Vec<HistogramRow>,
    pub trial_size: usize,
    pub external_size: usize,
    pub dim: usize,
    pub dropped: usize,
}

impl StarOutput {
    pub fn series(&self, learner: LearnerKind, n0: usize) -> Vec<Option<f64>> {
        self.values
            .iter()
            .filter(|v| v.learner == learner && v.n0 == n0)
            .map(|v| v.rmse)
            .collect()
    }

    pub fn row(&self, learner: LearnerKind, n0: usize) -> Option<&StarRow> {
        self.rows
            .iter()
            .find(|r| r.learner == learner.name() && r.n0 == n0)
    }
}

/// Histogram of the estimated `Pr(S=1 | X)` over `bins` equal-width bins on
/// `[0, 1]`, split by source.
pub fn overlap_histogram(
    ds: &Dataset,
    spec: &ProbClassifierSpec,
    bins: usize,
) -> Result<Vec<HistogramRow>> {
    let clf = fit_logistic(&ds.x, &ds.s, spec)?;
    let mut rows: Vec<HistogramRow> = (0..bins)
        .map(|b| HistogramRow {
            bin_lo: b as f64 / bins as f64,
            bin_hi: (b + 1) as f64 / bins as f64,
            trial_count: 0,
            external_count: 0,
        })
        .collect();
    for i in 0..ds.n() {
        let p = clf.predict_proba_row(ds.x.row(i));
        let b = ((p * bins as f64) as usize).min(bins - 1);
        if ds.s[i] == 1 {
            rows[b].trial_count += 1;
        } else {
            rows[b].external_count += 1;
        }
    }
    Ok(rows)
}

fn run_replication(spec: &StarExperiment, partition: &StarPartition, rep: u64) -> Vec<StarValue> {
    let cfg = spec
        .learner
        .clone()
        .with_seed(replication_seed(spec.seed, rep));
    let n_test = ((spec.n1 as f64) * spec.holdout).round() as usize;
    let mut out = Vec::new();
    for &n0 in &spec.n0 {
        let split =
            subsample(partition, spec.n1, n0, spec.seed, rep).and_then(|(trial, external)| {
                // same permutation for every n0, so the test rows are shared
                let mut idx: Vec<usize> = (0..trial.n()).collect();
                idx.shuffle(&mut stream(spec.seed, rep, Role::Holdout, 0));
                let test = trial.subset(&idx[..n_test]);
                let train = trial.subset(&idx[n_test..]).concat(&external)?;
                Ok((train, test))
            });
        for &learner in &spec.learners {
            let rmse = match &split {
                Ok((train, test)) => learner
                    .fit(train, &cfg)
                    .and_then(|m| rmse_vs_proxy(&m, test)),
                Err(e) => Err(Error::Config(e.to_string())),
            };
            if let Err(e) = &rmse {
                log::warn!("replication {rep}, n0={n0}, {learner}: {e}");
            }
            out.push(StarValue {
                learner,
                n0,
                replication: rep,
                rmse: rmse.ok(),
            });
        }
    }
    out
}

/// Proxy error of every learner across the `n0` sweep at fixed `n1`, plus the
/// participation overlap histogram of the full partition.
pub fn run_star_experiment(spec: &StarExperiment, threads: Option<usize>) -> Result<StarOutput> {
    spec.validate()?;
    let raw = spec.load()?;
    let partition =
        build_star_partition(&raw, spec.partition_seed, spec.trial_propensity)?.standardized();
    if spec.n1 > partition.trial.n() {
        return Err(Error::Config(format!(
            "n1={} exceeds the {} trial rows",
            spec.n1,
            partition.trial.n()
        )));
    }
    let max_n0 = spec.n0.iter().copied().max().unwrap_or(0);
    if max_n0 > partition.external.n() {
        return Err(Error::Config(format!(
            "n0={max_n0} exceeds the {} external rows",
            partition.external.n()
        )));
    }
    let n_test = ((spec.n1 as f64) * spec.holdout).round() as usize;
    if n_test == 0 || n_test >= spec.n1 {
        return Err(Error::Config(
            "holdout leaves an empty train or test split".into(),
        ));
    }
    let per_rep: Vec<Vec<StarValue>> = with_pool(threads, || {
        (0..spec.reps as u64)
            .into_par_iter()
            .map(|rep| run_replication(spec, &partition, rep))
            .collect()
    })?;
    let values: Vec<StarValue> = per_rep.into_iter().flatten().collect();
    let mut classifier = spec.learner.classifier.clone();
    classifier.seed = spec.seed;
    let all = partition.trial.concat(&partition.external)?;
    let histogram = overlap_histogram(&all, &classifier, spec.histogram_bins)?;
    let mut out = StarOutput {
        rows: Vec::new(),
        values,
        histogram,
        trial_size: partition.trial.n(),
        external_size: partition.external.n(),
        dim: partition.dim(),
        dropped: partition.dropped(),
    };
    for &n0 in &spec.n0 {
        for &learner in &spec.learners {
            let s = summarize(&out.series(learner, n0));
            out.rows.push(StarRow {
                learner: learner.name().into(),
                n1: spec.n1,
                n0,
                mean_rmse: s.mean,
                se: s.se,
                r: s.r,
                failed: s.failed,
            });
        }
    }
    Ok(out)
}
