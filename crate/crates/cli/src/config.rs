//! Declarative run configuration. A TOML file supplies any subset of these
//! fields; command-line flags override them.

use std::path::{Path, PathBuf};

use qrlearn::data::{CsvSchema, Field, RawTable};
use qrlearn::experiments::{PowerExperiment, RmseExperiment, StarExperiment};
use qrlearn::star::SyntheticStar;
use qrlearn::{LearnerConfig, LearnerKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QRLEARN_OUT_DIR";

pub const SNAPSHOT_FILE: &str = "resolved_config.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub simulate_rmse: Option<RmseExperiment>,
    pub simulate_power: Option<PowerExperiment>,
    pub star_prep: Option<StarPrep>,
    pub star_eval: Option<StarExperiment>,
    pub transport_test: Option<TransportTest>,
    pub fit: Option<FitJob>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self)
            .map_err(|e| CliError::Config(format!("cannot serialize resolved config: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StarPrep {
    /// Raw extract; the synthetic generator is used when absent.
    pub input: Option<PathBuf>,
    pub synthetic: SyntheticStar,
    pub partition_seed: u64,
    pub trial_propensity: f64,
}

impl Default for StarPrep {
    fn default() -> Self {
        Self {
            input: None,
            synthetic: SyntheticStar::default(),
            partition_seed: 0,
            trial_propensity: 0.5,
        }
    }
}

/// Column roles of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableSpec {
    /// Numeric covariates; every column without a role when absent.
    pub covariates: Option<Vec<String>>,
    pub categorical: Vec<String>,
    pub source: String,
    pub treatment: String,
    pub outcome: String,
    pub propensity: Field<f64>,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self {
            covariates: None,
            categorical: Vec::new(),
            source: "s".into(),
            treatment: "a".into(),
            outcome: "y".into(),
            propensity: Field::Column("e".into()),
        }
    }
}

/// Columns never treated as covariates when the list is inferred.
const RESERVED: [&str; 1] = ["tau"];

impl TableSpec {
    /// Schema for `table`. `source` overrides the configured source column.
    pub fn schema(&self, table: &RawTable, source: Option<Field<u8>>) -> CsvSchema {
        let covariates = match &self.covariates {
            Some(c) => c.clone(),
            None => {
                let mut roles: Vec<&str> = vec![&self.treatment, &self.outcome, &self.source];
                if let Some(Field::Column(c)) = &source {
                    roles.push(c);
                }
                if let Field::Column(c) = &self.propensity {
                    roles.push(c);
                }
                roles.extend(self.categorical.iter().map(String::as_str));
                roles.extend(RESERVED);
                table
                    .headers
                    .iter()
                    .filter(|h| !roles.contains(&h.as_str()))
                    .cloned()
                    .collect()
            }
        };
        CsvSchema {
            covariates,
            categorical: self.categorical.clone(),
            source: source.unwrap_or_else(|| Field::Column(self.source.clone())),
            treatment: self.treatment.clone(),
            outcome: self.outcome.clone(),
            propensity: self.propensity.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportTest {
    pub data: Option<PathBuf>,
    pub table: TableSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitJob {
    pub learner: LearnerKind,
    /// Trial rows; every row is given `s = 1`.
    pub trial: Option<PathBuf>,
    /// External rows; every row is given `s = 0`.
    pub external: Option<PathBuf>,
    /// Rows to predict on; the trial file when absent.
    pub predict: Option<PathBuf>,
    pub table: TableSpec,
    pub settings: LearnerConfig,
}

impl Default for FitJob {
    fn default() -> Self {
        Self {
            learner: LearnerKind::Qr,
            trial: None,
            external: None,
            predict: None,
            table: TableSpec::default(),
            settings: LearnerConfig::default(),
        }
    }
}

/// `0.5` becomes a constant propensity, anything else a column name.
pub fn parse_propensity(s: &str) -> Field<f64> {
    match s.parse::<f64>() {
        Ok(v) => Field::Constant(v),
        Err(_) => Field::Column(s.to_string()),
    }
}

/// Flag, then config, then environment, then `./qrlearn-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>, file: Option<&PathBuf>) -> PathBuf {
    flag.or_else(|| file.cloned())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qrlearn-out"))
}
