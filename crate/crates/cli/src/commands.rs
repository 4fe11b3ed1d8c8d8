use std::path::{Path, PathBuf};

use log::info;
use qrlearn::data::{dataset_from_table, Field, RawTable};
use qrlearn::experiments::{
    run_power_experiment, run_rmse_experiment, run_star_experiment, write_rows,
};
use qrlearn::inference::transportability_test;
use qrlearn::star::{build_star_partition, synthetic_star, StarRaw};
use qrlearn::{features_from_table, Predict};
use serde::Serialize;

use crate::config::{parse_propensity, resolve_out_dir, ConfigFile, TableSpec, SNAPSHOT_FILE};
use crate::error::CliError;
use crate::{Cli, Command, TableArgs};

/// Name of the source column added when trial and external files are stacked.
const SOURCE_COLUMN: &str = "__source";

struct Context {
    out: PathBuf,
    threads: Option<usize>,
    seed: Option<u64>,
}

impl Context {
    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if cli.global.threads == Some(0) || file.threads == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    let ctx = Context {
        out: resolve_out_dir(cli.global.out, file.out_dir.as_ref()),
        threads: cli.global.threads.or(file.threads),
        seed: cli.global.seed.or(file.seed),
    };
    std::fs::create_dir_all(&ctx.out)
        .map_err(|e| CliError::io(format!("creating {}", ctx.out.display()), e))?;

    let mut snapshot = ConfigFile {
        threads: ctx.threads,
        out_dir: Some(ctx.out.clone()),
        ..Default::default()
    };
    match cli.command {
        Command::SimulateRmse(args) => {
            let mut spec = file.simulate_rmse.unwrap_or_default();
            set(&mut spec.scenario, args.scenario);
            set(&mut spec.n1, args.n1);
            set(&mut spec.n0, args.n0);
            set(&mut spec.reps, args.reps);
            set(&mut spec.learners, args.learners);
            set(&mut spec.eval_size, args.eval_size);
            set(&mut spec.alpha0, args.alpha0);
            set(&mut spec.seed, ctx.seed);
            spec.validate()?;
            let out = run_rmse_experiment(&spec, ctx.threads)?;
            write_rows(&ctx.path("rmse_results.csv"), &out.rows)?;
            snapshot.simulate_rmse = Some(spec);
        }
        Command::SimulatePower(args) => {
            let mut spec = file.simulate_power.unwrap_or_default();
            set(&mut spec.n1, args.n1);
            set(&mut spec.n0, args.n0);
            set(&mut spec.beta, args.beta);
            set(&mut spec.reps, args.reps);
            set(&mut spec.methods, args.methods);
            set(&mut spec.z, args.z);
            set(&mut spec.alpha0, args.alpha0);
            set(&mut spec.seed, ctx.seed);
            spec.validate()?;
            let out = run_power_experiment(&spec, ctx.threads)?;
            write_rows(&ctx.path("power_results.csv"), &out.rows)?;
            snapshot.simulate_power = Some(spec);
        }
        Command::StarPrep(args) => {
            let mut spec = file.star_prep.unwrap_or_default();
            if args.input.is_some() {
                spec.input = args.input;
            }
            set(&mut spec.partition_seed, args.partition_seed);
            set(&mut spec.trial_propensity, args.trial_propensity);
            set(&mut spec.synthetic.seed, ctx.seed);
            let raw = match &spec.input {
                Some(p) => StarRaw::read(p)?,
                None => synthetic_star(&spec.synthetic)?,
            };
            let part = build_star_partition(&raw, spec.partition_seed, spec.trial_propensity)?
                .standardized();
            part.trial.write_csv(&ctx.path("star_trial.csv"))?;
            part.external.write_csv(&ctx.path("star_external.csv"))?;
            print_json(&PrepSummary {
                records: raw.records.len(),
                trial: part.trial.n(),
                external: part.external.n(),
                removed: part.dropped(),
                features: part.dim(),
            });
            snapshot.star_prep = Some(spec);
        }
        Command::StarEval(args) => {
            let mut spec = file.star_eval.unwrap_or_default();
            if args.input.is_some() {
                spec.input = args.input;
            }
            set(&mut spec.n1, args.n1);
            set(&mut spec.n0, args.n0);
            set(&mut spec.reps, args.reps);
            set(&mut spec.learners, args.learners);
            set(&mut spec.holdout, args.holdout);
            set(&mut spec.partition_seed, args.partition_seed);
            set(&mut spec.seed, ctx.seed);
            spec.validate()?;
            let out = run_star_experiment(&spec, ctx.threads)?;
            write_rows(&ctx.path("star_results.csv"), &out.rows)?;
            write_rows(&ctx.path("overlap_histogram.csv"), &out.histogram)?;
            info!(
                "trial {} rows, external {} rows, {} removed, {} features",
                out.trial_size, out.external_size, out.dropped, out.dim
            );
            snapshot.star_eval = Some(spec);
        }
        Command::TransportTest(args) => {
            let mut spec = file.transport_test.unwrap_or_default();
            if args.data.is_some() {
                spec.data = args.data;
            }
            set(&mut spec.table.source, args.source);
            apply_table(&mut spec.table, args.table);
            let path = spec
                .data
                .clone()
                .ok_or_else(|| CliError::Config("transport-test needs --data".into()))?;
            let table = RawTable::read(&path)?;
            let ds = dataset_from_table(&table, &spec.table.schema(&table, None))?;
            let result = transportability_test(&ds)?;
            write_rows(
                &ctx.path("transport_test.csv"),
                std::slice::from_ref(&result),
            )?;
            print_json(&result);
            snapshot.transport_test = Some(spec);
        }
        Command::Fit(args) => {
            let mut spec = file.fit.unwrap_or_default();
            set(&mut spec.learner, args.learner);
            if args.trial.is_some() {
                spec.trial = args.trial;
            }
            if args.external.is_some() {
                spec.external = args.external;
            }
            if args.predict.is_some() {
                spec.predict = args.predict;
            }
            apply_table(&mut spec.table, args.table);
            set(&mut spec.settings.seed, ctx.seed);
            spec.settings.validate()?;
            let trial_path = spec
                .trial
                .clone()
                .ok_or_else(|| CliError::Config("fit needs --trial".into()))?;
            let trial = RawTable::read(&trial_path)?;
            let external = spec.external.as_deref().map(RawTable::read).transpose()?;
            let stacked = stack(&trial, external.as_ref())?;
            let schema = spec
                .table
                .schema(&trial, Some(Field::Column(SOURCE_COLUMN.into())));
            let ds = dataset_from_table(&stacked, &schema)?;
            let model = spec.learner.fit(&ds, &spec.settings)?;

            let target = match &spec.predict {
                Some(p) => RawTable::read(p)?,
                None => trial,
            };
            let x = features_from_table(&target, &ds.feature_names, &schema.categorical)?;
            let rows: Vec<Prediction> = x
                .rows()
                .enumerate()
                .map(|(row, xi)| Prediction {
                    row,
                    tau_hat: model.predict_row(xi),
                })
                .collect();
            write_rows(&ctx.path("predictions.csv"), &rows)?;
            print_json(&FitSummary {
                learner: spec.learner.name(),
                trial_rows: ds.n_trial(),
                external_rows: ds.n() - ds.n_trial(),
                features: ds.feature_names.clone(),
                lambda: model.provenance.lambda,
                predictions: rows.len(),
                warnings: model.warnings(),
            });
            snapshot.fit = Some(spec);
        }
    }
    write_snapshot(&ctx.path(SNAPSHOT_FILE), &snapshot)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_table(spec: &mut TableSpec, args: TableArgs) {
    if args.covariates.is_some() {
        spec.covariates = args.covariates;
    }
    set(&mut spec.categorical, args.categorical);
    set(&mut spec.treatment, args.treatment);
    set(&mut spec.outcome, args.outcome);
    set(
        &mut spec.propensity,
        args.propensity.as_deref().map(parse_propensity),
    );
}

/// Trial rows then external rows, matched by column name, with a source column
/// appended. Columns absent from the trial file are dropped.
fn stack(trial: &RawTable, external: Option<&RawTable>) -> Result<RawTable, CliError> {
    let mut headers = trial.headers.clone();
    headers.push(SOURCE_COLUMN.into());
    let mut rows: Vec<Vec<String>> = trial
        .rows
        .iter()
        .map(|r| r.iter().cloned().chain(["1".to_string()]).collect())
        .collect();
    if let Some(ext) = external {
        let idx = trial
            .headers
            .iter()
            .map(|h| ext.column_index(h))
            .collect::<qrlearn::Result<Vec<_>>>()?;
        rows.extend(ext.rows.iter().map(|r| {
            idx.iter()
                .map(|&j| r[j].clone())
                .chain(["0".to_string()])
                .collect()
        }));
    }
    Ok(RawTable { headers, rows })
}

fn write_snapshot(path: &Path, snapshot: &ConfigFile) -> Result<(), CliError> {
    let text = snapshot.to_toml()?;
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string(value).expect("plain struct serializes")
    );
}

#[derive(Serialize)]
struct PrepSummary {
    records: usize,
    trial: usize,
    external: usize,
    removed: usize,
    features: usize,
}

#[derive(Serialize)]
struct Prediction {
    row: usize,
    tau_hat: f64,
}

#[derive(Serialize)]
struct FitSummary {
    learner: &'static str,
    trial_rows: usize,
    external_rows: usize,
    features: Vec<String>,
    lambda: Option<f64>,
    predictions: usize,
    warnings: Vec<String>,
}
