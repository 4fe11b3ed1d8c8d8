//! Synthetic trial and external data with known CATE.
//!
//! Covariates are `N(μ_s, Σ/√d)` with `Σ` unit-diagonal and 0.1 off the
//! diagonal, `μ_1 = 0` and `μ_0 = 0.2·1`. Trial treatment is a fair coin;
//! external treatment is `logistic(α₀ + αᵀx)`. Outcomes are
//! `Y = b(X) + A·τ(X) + ε` with `ε ~ N(0, σ²)`.
//!
//! Rows are drawn one at a time from a stream keyed by `(seed, replication,
//! source)`, so the first `n` rows of a block do not depend on the block size
//! and the trial block does not depend on the external one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::rng::{stream, NormalSampler, Role};

/// Propensity of the trial coin, also written into external rows.
pub const TRIAL_PROPENSITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Non-linear baseline, linear CATE, every covariate observed.
    RmseAligned,
    /// As aligned but with the last two covariates hidden from the learners.
    RmseViolated,
    /// Linear baseline and a sparse CATE whose slope differs between sources.
    Power,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::RmseAligned => "rmse-aligned",
            Self::RmseViolated => "rmse-violated",
            Self::Power => "power",
        }
    }

    pub fn default_dim(self) -> usize {
        match self {
            Self::RmseViolated => 7,
            _ => 5,
        }
    }

    /// Columns dropped from the emitted dataset.
    pub fn masked(self) -> usize {
        match self {
            Self::RmseViolated => 2,
            _ => 0,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::RmseAligned, Self::RmseViolated, Self::Power]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub scenario: Scenario,
    pub n1: usize,
    pub n0: usize,
    /// Generative covariate dimension, masked columns included.
    pub d: usize,
    /// Trial CATE slope of the power scenario.
    #[serde(default)]
    pub beta: f64,
    /// Extra external slope of the power scenario.
    #[serde(default = "default_shift")]
    pub external_shift: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub alpha0: f64,
    /// External propensity slopes; `None` means `(1/√d)·1`.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
}

fn default_shift() -> f64 {
    1.0 / 20.0
}

fn default_sigma2() -> f64 {
    0.25
}

impl DgpConfig {
    pub fn new(scenario: Scenario, n1: usize, n0: usize) -> Self {
        Self {
            scenario,
            n1,
            n0,
            d: scenario.default_dim(),
            beta: 0.0,
            external_shift: default_shift(),
            sigma2: default_sigma2(),
            alpha0: 0.0,
            alpha: None,
            seed: 0,
            replication: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64, replication: u64) -> Self {
        self.seed = seed;
        self.replication = replication;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d <= self.scenario.masked() {
            return Err(Error::Config(format!(
                "dimension {} too small for scenario {}",
                self.d,
                self.scenario.name()
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config("noise variance must be positive".into()));
        }
        if let Some(alpha) = &self.alpha {
            if alpha.len() != self.d {
                return Err(Error::Config(format!(
                    "{} propensity slopes for dimension {}",
                    alpha.len(),
                    self.d
                )));
            }
        }
        if !self.beta.is_finite() || !self.alpha0.is_finite() || !self.external_shift.is_finite() {
            return Err(Error::Config("non-finite generator parameter".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.alpha
            .clone()
            .unwrap_or_else(|| vec![1.0 / (self.d as f64).sqrt(); self.d])
    }

    /// Columns seen by learners.
    pub fn observed_dim(&self) -> usize {
        self.d - self.scenario.masked()
    }
}

/// A simulated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct LabeledDraw {
    pub dataset: Dataset,
    /// `τ(xᵢ)` for every row, evaluated on the full generative covariates.
    pub tau: Vec<f64>,
    /// Generative covariates including masked columns.
    pub full_x: Matrix,
}

impl LabeledDraw {
    /// Dataset columns followed by a `tau` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let ds = &self.dataset;
        let mut header: Vec<String> = ds.feature_names.clone();
        header.extend(["s", "a", "y", "e", "tau"].map(String::from));
        w.write_record(&header)?;
        for i in 0..ds.n() {
            let mut rec: Vec<String> = ds.x.row(i).iter().map(f64::to_string).collect();
            rec.push(ds.s[i].to_string());
            rec.push(ds.a[i].to_string());
            rec.push(ds.y[i].to_string());
            rec.push(ds.e[i].to_string());
            rec.push(self.tau[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Baseline outcome `b(x)`.
pub fn baseline(scenario: Scenario, x: &[f64]) -> f64 {
    let d = x.len() as f64;
    match scenario {
        Scenario::Power => x.iter().sum::<f64>() / d,
        _ => {
            let cos: f64 = x.iter().map(|v| (1.5 * v).cos()).sum::<f64>() * 3.0 / d;
            let s: f64 = x.iter().sum();
            cos + s * s / d
        }
    }
}

/// `τ(x)` for a row of source `s` with the full generative covariates.
pub fn true_cate(cfg: &DgpConfig, x: &[f64], s: u8) -> Result<f64> {
    if x.len() != cfg.d {
        return Err(Error::Dimension(format!(
            "{} covariates, generator has {}",
            x.len(),
            cfg.d
        )));
    }
    let d = cfg.d as f64;
    Ok(match cfg.scenario {
        Scenario::Power => {
            let slope = if s == 1 {
                cfg.beta
            } else {
                cfg.beta + cfg.external_shift
            };
            slope * d * x[0]
        }
        _ => x.iter().sum::<f64>() / d,
    })
}

fn covariance_factor(d: usize) -> Vec<f64> {
    let scale = 1.0 / (d as f64).sqrt();
    let mut cov = vec![0.1 * scale; d * d];
    for j in 0..d {
        cov[j * d + j] = scale;
    }
    cholesky(&cov, d, 0.0).expect("the covariance is positive definite")
}

struct Block {
    x: Vec<f64>,
    a: Vec<u8>,
    y: Vec<f64>,
    tau: Vec<f64>,
}

fn draw_block(cfg: &DgpConfig, s: u8, n: usize, role: Role, tag: u64) -> Result<Block> {
    let d = cfg.d;
    let l = covariance_factor(d);
    let mean = if s == 1 { 0.0 } else { 0.2 };
    let alpha = cfg.alpha();
    let sigma = cfg.sigma2.sqrt();
    let mut rng = NormalSampler::new(stream(cfg.seed, cfg.replication, role, tag));
    let mut out = Block {
        x: Vec::with_capacity(n * d),
        a: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        tau: Vec::with_capacity(n),
    };
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample();
        }
        for j in 0..d {
            x[j] = mean + (0..=j).map(|k| l[j * d + k] * z[k]).sum::<f64>();
        }
        let p = if s == 1 {
            TRIAL_PROPENSITY
        } else {
            let lin = cfg.alpha0 + alpha.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>();
            1.0 / (1.0 + (-lin).exp())
        };
        let a = u8::from(rng.uniform() < p);
        let tau = true_cate(cfg, &x, s)?;
        let y = baseline(cfg.scenario, &x) + f64::from(a) * tau + sigma * rng.sample();
        out.x.extend_from_slice(&x);
        out.a.push(a);
        out.y.push(y);
        out.tau.push(tau);
    }
    Ok(out)
}

fn assemble(cfg: &DgpConfig, blocks: Vec<(u8, Block)>) -> Result<LabeledDraw> {
    let d = cfg.d;
    let keep = cfg.observed_dim();
    let n: usize = blocks.iter().map(|(_, b)| b.a.len()).sum();
    let mut full = Vec::with_capacity(n * d);
    let (mut s, mut a, mut y, mut tau) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (src, b) in blocks {
        s.extend(std::iter::repeat_n(src, b.a.len()));
        full.extend(b.x);
        a.extend(b.a);
        y.extend(b.y);
        tau.extend(b.tau);
    }
    let full_x = Matrix::new(n, d, full)?;
    let x = full_x.select_columns(&(0..keep).collect::<Vec<_>>());
    let dataset = Dataset::new(x, s, a, y, vec![TRIAL_PROPENSITY; n])?;
    Ok(LabeledDraw {
        dataset,
        tau,
        full_x,
    })
}

/// Trial rows followed by external rows.
pub fn generate(cfg: &DgpConfig) -> Result<LabeledDraw> {
    cfg.validate()?;
    let trial = draw_block(cfg, 1, cfg.n1, Role::TrialDraw, 0)?;
    let external = draw_block(cfg, 0, cfg.n0, Role::ExternalDraw, 0)?;
    assemble(cfg, vec![(1, trial), (0, external)])
}

/// Fresh trial rows, independent of [`generate`], for out-of-sample error.
pub fn generate_eval(cfg: &DgpConfig, n: usize, tag: u64) -> Result<LabeledDraw> {
    cfg.validate()?;
    let block = draw_block(cfg, 1, n, Role::EvalDraw, tag)?;
    assemble(cfg, vec![(1, block)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cate_examples() {
        let mut cfg = DgpConfig::new(Scenario::Power, 1, 1);
        cfg.beta = 0.1;
        assert!((true_cate(&cfg, &[2.0, 0.0, 0.0, 0.0, 0.0], 1).unwrap() - 1.0).abs() < 1e-15);
        cfg.beta = 0.0;
        assert!((true_cate(&cfg, &[1.0, 0.0, 0.0, 0.0, 0.0], 0).unwrap() - 0.25).abs() < 1e-15);
        let cfg = DgpConfig::new(Scenario::RmseAligned, 1, 1);
        assert!((true_cate(&cfg, &[1.0; 5], 1).unwrap() - 1.0).abs() < 1e-15);
        assert!(true_cate(&cfg, &[1.0; 4], 1).is_err());
        assert!((baseline(Scenario::RmseAligned, &[0.0; 5]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_external_block() {
        let draw = generate(&DgpConfig::new(Scenario::RmseAligned, 20, 0)).unwrap();
        assert_eq!(draw.dataset.n(), 20);
        assert!(draw.dataset.s.iter().all(|&s| s == 1));
        assert!(draw.dataset.e.iter().all(|&e| e == 0.5));
    }

    #[test]
    fn violated_masks_two_columns() {
        let draw = generate(&DgpConfig::new(Scenario::RmseViolated, 10, 10)).unwrap();
        assert_eq!(draw.dataset.d(), 5);
        assert_eq!(draw.full_x.ncols(), 7);
        for i in 0..20 {
            assert_eq!(draw.dataset.x.row(i), &draw.full_x.row(i)[..5]);
        }
    }

    #[test]
    fn trial_prefix_is_stable() {
        let small =
            generate(&DgpConfig::new(Scenario::RmseAligned, 10, 5).with_seed(3, 2)).unwrap();
        let big = generate(&DgpConfig::new(Scenario::RmseAligned, 30, 50).with_seed(3, 2)).unwrap();
        for i in 0..10 {
            assert_eq!(small.dataset.x.row(i), big.dataset.x.row(i));
            assert_eq!(small.dataset.y[i], big.dataset.y[i]);
        }
    }
}
