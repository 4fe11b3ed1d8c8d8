//! `qrlearn`: simulation studies, STAR preprocessing and evaluation,
//! transportability testing and single fits from the command line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrlearn::experiments::PowerMethod;
use qrlearn::simgen::Scenario;
use qrlearn::LearnerKind;

use crate::error::{error_line, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "qrlearn",
    version,
    about = "CATE estimation for trials augmented with external data"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $QRLEARN_OUT_DIR, then ./qrlearn-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when omitted. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo RMSE of CATE learners on simulated data.
    SimulateRmse(RmseArgs),
    /// Rejection rates of the interaction tests on simulated data.
    SimulatePower(PowerArgs),
    /// Split a STAR extract into trial and external CSVs.
    StarPrep(StarPrepArgs),
    /// Repeated-subsampling evaluation of learners on STAR.
    StarEval(StarEvalArgs),
    /// Test whether the outcome model transports from external to trial rows.
    TransportTest(TransportArgs),
    /// Fit one learner and predict the CATE.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct RmseArgs {
    /// `aligned`, `violated`, or a full scenario name.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n0: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub learners: Option<Vec<LearnerKind>>,
    #[arg(long)]
    pub eval_size: Option<usize>,
    /// Intercept of the external treatment propensity.
    #[arg(long)]
    pub alpha0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, value_delimiter = ',')]
    pub n1: Option<Vec<usize>>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<PowerMethod>>,
    /// Index of the tested covariate.
    #[arg(long)]
    pub z: Option<usize>,
    #[arg(long)]
    pub alpha0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StarPrepArgs {
    /// STAR extract; a synthetic one is generated when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub partition_seed: Option<u64>,
    #[arg(long)]
    pub trial_propensity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StarEvalArgs {
    /// STAR extract; a synthetic one is generated when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n0: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub learners: Option<Vec<LearnerKind>>,
    /// Share of each trial subsample held out for evaluation.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub partition_seed: Option<u64>,
}

/// Column roles of input CSVs.
#[derive(Debug, Args)]
pub struct TableArgs {
    /// Numeric covariates [default: every column without another role].
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Categorical covariates, one-hot encoded.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Option<Vec<String>>,
    #[arg(long)]
    pub treatment: Option<String>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Trial propensity: a column name or a constant such as `0.5`.
    #[arg(long)]
    pub propensity: Option<String>,
}

#[derive(Debug, Args)]
pub struct TransportArgs {
    /// CSV holding trial and external rows.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column with 1 for trial rows and 0 for external rows.
    #[arg(long)]
    pub source: Option<String>,
    #[command(flatten)]
    pub table: TableArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub learner: Option<LearnerKind>,
    #[arg(long)]
    pub trial: Option<PathBuf>,
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Rows to predict for [default: the trial file].
    #[arg(long)]
    pub predict: Option<PathBuf>,
    #[command(flatten)]
    pub table: TableArgs,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    match s {
        "aligned" => Ok(Scenario::RmseAligned),
        "violated" => Ok(Scenario::RmseViolated),
        _ => s.parse().map_err(|e: qrlearn::Error| e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report(&err),
    }
}

fn report(err: &CliError) -> ExitCode {
    eprintln!("{}", error_line(err));
    ExitCode::from(err.exit_code() as u8)
}
