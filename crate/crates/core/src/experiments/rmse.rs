use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{replication_seed, rmse_vs_truth, summarize, validate_reps, with_pool};
use crate::error::{Error, Result};
use crate::learners::{LearnerConfig, LearnerKind};
use crate::simgen::{generate, generate_eval, DgpConfig, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmseExperiment {
    pub scenario: Scenario,
    pub learners: Vec<LearnerKind>,
    pub n1: usize,
    /// External sample sizes swept within every replication.
    pub n0: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Fresh trial rows per replication for the error estimate.
    pub eval_size: usize,
    pub alpha0: f64,
    pub alpha: Option<Vec<f64>>,
    pub learner: LearnerConfig,
}

impl Default for RmseExperiment {
    fn default() -> Self {
        Self {
            scenario: Scenario::RmseAligned,
            learners: LearnerKind::ALL.to_vec(),
            n1: 250,
            n0: vec![100, 1000, 10000],
            reps: 100,
            seed: 0,
            eval_size: 2000,
            alpha0: 0.0,
            alpha: None,
            learner: LearnerConfig::default(),
        }
    }
}

impl RmseExperiment {
    pub fn validate(&self) -> Result<()> {
        validate_reps(self.reps)?;
        if self.learners.is_empty() || self.n0.is_empty() {
            return Err(Error::Config(
                "learner list and n0 sweep must be nonempty".into(),
            ));
        }
        if self.scenario == Scenario::Power {
            return Err(Error::Config(
                "the power scenario has no RMSE experiment".into(),
            ));
        }
        if self.eval_size == 0 {
            return Err(Error::Config("evaluation size must be positive".into()));
        }
        self.learner.validate()?;
        self.dgp(self.n0[0], 0).validate()
    }

    pub fn dgp(&self, n0: usize, replication: u64) -> DgpConfig {
        let mut cfg = DgpConfig::new(self.scenario, self.n1, n0).with_seed(self.seed, replication);
        cfg.alpha0 = self.alpha0;
        cfg.alpha = self.alpha.clone();
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseRow {
    pub learner: String,
    pub scenario: String,
    pub n1: usize,
    pub n0: usize,
    pub mean_rmse: Option<f64>,
    pub se: Option<f64>,
    #[serde(rename = "R")]
    pub r: usize,
    pub failed: usize,
}

/// One replication's error for one learner and external size.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseValue {
    pub learner: LearnerKind,
    pub n0: usize,
    pub replication: u64,
    pub rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseOutput {
    pub rows: Vec<RmseRow>,
    /// Replication-major, then n0, then learner.
    pub values: Vec<RmseValue>,
}

impl RmseOutput {
    /// Successful per-replication errors of one cell, in replication order.
    pub fn series(&self, learner: LearnerKind, n0: usize) -> Vec<Option<f64>> {
        self.values
            .iter()
            .filter(|v| v.learner == learner && v.n0 == n0)
            .map(|v| v.rmse)
            .collect()
    }
}

fn run_replication(spec: &RmseExperiment, rep: u64) -> Vec<RmseValue> {
    let cfg = spec
        .learner
        .clone()
        .with_seed(replication_seed(spec.seed, rep));
    let mut out = Vec::with_capacity(spec.n0.len() * spec.learners.len());
    for &n0 in &spec.n0 {
        let dgp = spec.dgp(n0, rep);
        let drawn = generate(&dgp).and_then(|d| Ok((d, generate_eval(&dgp, spec.eval_size, 0)?)));
        for &learner in &spec.learners {
            let result = match &drawn {
                Ok((draw, eval)) => learner
                    .fit(&draw.dataset, &cfg)
                    .and_then(|m| rmse_vs_truth(&m, eval)),
                Err(e) => Err(Error::Config(e.to_string())),
            };
            if let Err(e) = &result {
                log::warn!("replication {rep}, n0={n0}, {learner}: {e}");
            }
            out.push(RmseValue {
                learner,
                n0,
                replication: rep,
                rmse: result.as_ref().ok().copied(),
                error: result.err().map(|e| e.to_string()),
            });
        }
    }
    out
}

/// Runs every replication, fits every learner at every external size and
/// aggregates per `(learner, n0)`. A failed fit is counted, not fatal.
pub fn run_rmse_experiment(spec: &RmseExperiment, threads: Option<usize>) -> Result<RmseOutput> {
    spec.validate()?;
    let per_rep: Vec<Vec<RmseValue>> = with_pool(threads, || {
        (0..spec.reps as u64)
            .into_par_iter()
            .map(|rep| run_replication(spec, rep))
            .collect()
    })?;
    let values: Vec<RmseValue> = per_rep.into_iter().flatten().collect();
    let mut out = RmseOutput {
        rows: Vec::new(),
        values,
    };
    for &n0 in &spec.n0 {
        for &learner in &spec.learners {
            let s = summarize(&out.series(learner, n0));
            out.rows.push(RmseRow {
                learner: learner.name().into(),
                scenario: spec.scenario.name().into(),
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
