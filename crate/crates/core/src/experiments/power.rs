use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{replication_seed, validate_reps, with_pool};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{interaction_test_ols, interaction_test_pseudo, TestResult};
use crate::learners::LearnerKind;
use crate::regressors::ProbClassifierSpec;
use crate::simgen::{generate, DgpConfig, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMethod {
    CovariateAdjustment,
    PooledCovariateAdjustment,
    DrPseudo,
    QrPseudo,
    AsiaeePseudo,
}

impl PowerMethod {
    pub const ALL: [PowerMethod; 5] = [
        Self::CovariateAdjustment,
        Self::PooledCovariateAdjustment,
        Self::DrPseudo,
        Self::QrPseudo,
        Self::AsiaeePseudo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CovariateAdjustment => "covariate-adjustment",
            Self::PooledCovariateAdjustment => "pooled-covariate-adjustment",
            Self::DrPseudo => "dr-pseudo",
            Self::QrPseudo => "qr-pseudo",
            Self::AsiaeePseudo => "asiaee-pseudo",
        }
    }

    pub fn test(
        self,
        ds: &Dataset,
        z: usize,
        classifier: &ProbClassifierSpec,
        seed: u64,
    ) -> Result<TestResult> {
        match self {
            Self::CovariateAdjustment => interaction_test_ols(ds, z, false),
            Self::PooledCovariateAdjustment => interaction_test_ols(ds, z, true),
            Self::DrPseudo => interaction_test_pseudo(ds, LearnerKind::Dr, z, classifier, seed),
            Self::QrPseudo => interaction_test_pseudo(ds, LearnerKind::Qr, z, classifier, seed),
            Self::AsiaeePseudo => {
                interaction_test_pseudo(ds, LearnerKind::Asiaee, z, classifier, seed)
            }
        }
    }
}

impl std::str::FromStr for PowerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown test method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerExperiment {
    pub methods: Vec<PowerMethod>,
    pub n1: Vec<usize>,
    pub n0: usize,
    /// Trial interaction slope when the effect is present.
    pub beta: f64,
    /// Additional external slope.
    pub external_shift: f64,
    pub reps: usize,
    pub seed: u64,
    /// Tested covariate.
    pub z: usize,
    pub alpha0: f64,
    pub alpha: Option<Vec<f64>>,
    pub classifier: ProbClassifierSpec,
}

/// Interaction slope giving the trial-only covariate-adjustment test moderate
/// power at `n1 = 500`.
pub const DEFAULT_BETA: f64 = 0.025;

impl Default for PowerExperiment {
    fn default() -> Self {
        Self {
            methods: PowerMethod::ALL.to_vec(),
            n1: vec![250, 500, 1000],
            n0: 1000,
            beta: DEFAULT_BETA,
            external_shift: 1.0 / 20.0,
            reps: 500,
            seed: 0,
            z: 0,
            alpha0: 0.0,
            alpha: None,
            classifier: ProbClassifierSpec::default(),
        }
    }
}

impl PowerExperiment {
    pub fn validate(&self) -> Result<()> {
        validate_reps(self.reps)?;
        if self.methods.is_empty() || self.n1.is_empty() {
            return Err(Error::Config(
                "method list and n1 sweep must be nonempty".into(),
            ));
        }
        self.classifier.validate()?;
        let cfg = self.dgp(self.n1[0], self.beta, 0);
        cfg.validate()?;
        if self.z >= cfg.observed_dim() {
            return Err(Error::Config(format!(
                "tested covariate {} out of range",
                self.z
            )));
        }
        Ok(())
    }

    pub fn dgp(&self, n1: usize, beta: f64, replication: u64) -> DgpConfig {
        let mut cfg = DgpConfig::new(Scenario::Power, n1, self.n0)
            .with_seed(self.seed, replication)
            .with_beta(beta);
        cfg.external_shift = self.external_shift;
        cfg.alpha0 = self.alpha0;
        cfg.alpha = self.alpha.clone();
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    EffectAbsent,
    EffectPresent,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Self::EffectAbsent => "effect-absent",
            Self::EffectPresent => "effect-present",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub method: String,
    pub n1: usize,
    pub setting: String,
    pub rejection_rate: Option<f64>,
    #[serde(rename = "R")]
    pub r: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerValue {
    pub method: PowerMethod,
    pub n1: usize,
    pub setting: Setting,
    pub replication: u64,
    pub rejected: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutput {
    pub rows: Vec<PowerRow>,
    pub values: Vec<PowerValue>,
}

impl PowerOutput {
    pub fn rate(&self, method: PowerMethod, n1: usize, setting: Setting) -> Option<f64> {
        let name = method.name();
        self.rows
            .iter()
            .find(|r| r.method == name && r.n1 == n1 && r.setting == setting.name())
            .and_then(|r| r.rejection_rate)
    }
}

fn run_replication(spec: &PowerExperiment, rep: u64) -> Vec<PowerValue> {
    let seed = replication_seed(spec.seed, rep);
    let mut classifier = spec.classifier.clone();
    classifier.seed = seed;
    let mut out = Vec::new();
    for &n1 in &spec.n1 {
        for (setting, beta) in [
            (Setting::EffectAbsent, 0.0),
            (Setting::EffectPresent, spec.beta),
        ] {
            let draw = generate(&spec.dgp(n1, beta, rep));
            for &method in &spec.methods {
                let result = draw
                    .as_ref()
                    .map_err(|e| Error::Config(e.to_string()))
                    .and_then(|d| method.test(&d.dataset, spec.z, &classifier, seed));
                if let Err(e) = &result {
                    log::warn!("replication {rep}, n1={n1}, {}: {e}", method.name());
                }
                out.push(PowerValue {
                    method,
                    n1,
                    setting,
                    replication: rep,
                    rejected: result.ok().map(|t| t.rejected),
                });
            }
        }
    }
    out
}

/// Rejection rates at the 5% level per method, trial size and setting.
pub fn run_power_experiment(spec: &PowerExperiment, threads: Option<usize>) -> Result<PowerOutput> {
    spec.validate()?;
    let per_rep: Vec<Vec<PowerValue>> = with_pool(threads, || {
        (0..spec.reps as u64)
            .into_par_iter()
            .map(|rep| run_replication(spec, rep))
            .collect()
    })?;
    let values: Vec<PowerValue> = per_rep.into_iter().flatten().collect();
    let mut rows = Vec::new();
    for &n1 in &spec.n1 {
        for setting in [Setting::EffectAbsent, Setting::EffectPresent] {
            for &method in &spec.methods {
                let cell: Vec<Option<bool>> = values
                    .iter()
                    .filter(|v| v.method == method && v.n1 == n1 && v.setting == setting)
                    .map(|v| v.rejected)
                    .collect();
                let ok: Vec<bool> = cell.iter().flatten().copied().collect();
                let rate = (!ok.is_empty())
                    .then(|| ok.iter().filter(|&&b| b).count() as f64 / ok.len() as f64);
                rows.push(PowerRow {
                    method: method.name().into(),
                    n1,
                    setting: setting.name().into(),
                    rejection_rate: rate,
                    r: ok.len(),
                    failed: cell.len() - ok.len(),
                });
            }
        }
    }
    Ok(PowerOutput { rows, values })
}
