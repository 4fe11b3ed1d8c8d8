use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qrlearn::simgen::{generate, DgpConfig, Scenario};

fn qrlearn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrlearn"))
        .current_dir(dir)
        .env_remove("QRLEARN_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn fixture() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/star_fixture.csv")
        .display()
        .to_string()
}

const SMALL_RMSE: [&str; 11] = [
    "simulate-rmse",
    "--n1",
    "100",
    "--n0",
    "50,100",
    "--reps",
    "2",
    "--learners",
    "ate,dr",
    "--eval-size",
    "200",
];

#[test]
fn simulate_rmse_writes_results_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_RMSE.to_vec();
    args.extend(["--scenario", "violated", "--out", "run"]);
    let out = qrlearn(dir.path(), &args);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = read(dir.path().join("run/rmse_results.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "learner,scenario,n1,n0,mean_rmse,se,R,failed");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("ate,rmse-violated,100,50,"));
    assert!(
        read(dir.path().join("run/resolved_config.toml")).contains("scenario = \"rmse-violated\"")
    );
}

#[test]
fn out_dir_falls_back_to_environment_then_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qrlearn"))
        .current_dir(dir.path())
        .env("QRLEARN_OUT_DIR", "from-env")
        .args(SMALL_RMSE)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("from-env/rmse_results.csv").exists());

    let out = qrlearn(dir.path(), &SMALL_RMSE);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("qrlearn-out/rmse_results.csv").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrlearn(dir.path(), &["simulate-rmse", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
    let out = qrlearn(dir.path(), &["simulate-rmse", "--learners", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_code_2_and_missing_config_with_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "[simulate_rmse]\nrepetitions = 3\n",
    )
    .unwrap();
    let out = qrlearn(dir.path(), &["--config", "bad.toml", "simulate-rmse"]);
    assert_eq!(out.status.code(), Some(2));
    let line = stderr(&out);
    assert!(line.contains("\"error\":\"config-file\""), "{line}");
    assert!(line.contains("repetitions"), "{line}");

    let out = qrlearn(dir.path(), &["--config", "absent.toml", "simulate-rmse"]);
    assert_eq!(out.status.code(), Some(3));

    let out = qrlearn(dir.path(), &["simulate-rmse", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn flags_override_config_and_the_snapshot_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 5\n[simulate_rmse]\nn1 = 100\nn0 = [40]\nreps = 7\nlearners = [\"dr\"]\neval_size = 150\n",
    )
    .unwrap();
    let out = qrlearn(
        dir.path(),
        &[
            "--config",
            "run.toml",
            "--out",
            "a",
            "simulate-rmse",
            "--reps",
            "2",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let first = read(dir.path().join("a/rmse_results.csv"));
    assert!(first
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("dr,rmse-aligned,100,40,"));
    assert!(first.contains(",2,0"), "{first}");
    let snapshot = read(dir.path().join("a/resolved_config.toml"));
    assert!(
        snapshot.contains("reps = 2") && snapshot.contains("seed = 5"),
        "{snapshot}"
    );

    let out = qrlearn(
        dir.path(),
        &[
            "--config",
            "a/resolved_config.toml",
            "--out",
            "b",
            "simulate-rmse",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(first, read(dir.path().join("b/rmse_results.csv")));
}

#[test]
fn simulate_power_writes_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrlearn(
        dir.path(),
        &[
            "simulate-power",
            "--n1",
            "200",
            "--n0",
            "200",
            "--reps",
            "3",
            "--methods",
            "covariate-adjustment,qr-pseudo",
            "--out",
            ".",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = read(dir.path().join("power_results.csv"));
    assert_eq!(
        csv.lines().next().unwrap(),
        "method,n1,setting,rejection_rate,R,failed"
    );
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn star_prep_then_fit_and_star_eval() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture();
    let out = qrlearn(
        dir.path(),
        &["star-prep", "--input", &input, "--out", "prep"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(
        summary.contains("\"records\":40") && summary.contains("\"trial\":12"),
        "{summary}"
    );
    let trial = read(dir.path().join("prep/star_trial.csv"));
    assert_eq!(trial.lines().count(), 13);

    let fit_args = [
        "fit",
        "--learner",
        "pooled-t",
        "--trial",
        "prep/star_trial.csv",
        "--external",
        "prep/star_external.csv",
        "--out",
        "fit",
    ];
    let out = qrlearn(dir.path(), &fit_args);
    assert!(out.status.success(), "{}", stderr(&out));
    let preds = read(dir.path().join("fit/predictions.csv"));
    assert_eq!(preds.lines().next().unwrap(), "row,tau_hat");
    assert_eq!(preds.lines().count(), 13);
    // identical argv, identical bytes
    let out = qrlearn(dir.path(), &fit_args);
    assert!(out.status.success());
    assert_eq!(preds, read(dir.path().join("fit/predictions.csv")));

    let out = qrlearn(
        dir.path(),
        &[
            "star-eval",
            "--n1",
            "300",
            "--n0",
            "100",
            "--reps",
            "2",
            "--learners",
            "dr,qr",
            "--out",
            "eval",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = read(dir.path().join("eval/star_results.csv"));
    assert_eq!(
        csv.lines().next().unwrap(),
        "learner,n1,n0,mean_rmse,se,R,failed"
    );
    assert_eq!(csv.lines().count(), 3);
    let hist = read(dir.path().join("eval/overlap_histogram.csv"));
    assert_eq!(hist.lines().count(), 21);
}

#[test]
fn fit_missing_outcome_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.csv"), "x1,a,e\n0.1,1,0.5\n0.2,0,0.5\n").unwrap();
    let out = qrlearn(
        dir.path(),
        &["fit", "--trial", "t.csv", "--outcome", "score"],
    );
    assert_eq!(out.status.code(), Some(3));
    let line = stderr(&out);
    assert!(
        line.contains("missing-column") && line.contains("score"),
        "{line}"
    );

    let out = qrlearn(dir.path(), &["fit", "--trial", "absent.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let out = qrlearn(dir.path(), &["fit"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_predicts_for_new_rows_with_constant_propensity() {
    let dir = tempfile::tempdir().unwrap();
    let draw = generate(&DgpConfig::new(Scenario::RmseAligned, 300, 300).with_seed(3, 0)).unwrap();
    let ds = &draw.dataset;
    ds.subset(&ds.trial_rows())
        .write_csv(&dir.path().join("trial.csv"))
        .unwrap();
    ds.subset(&ds.external_rows())
        .write_csv(&dir.path().join("external.csv"))
        .unwrap();
    let header = format!("{}\n", ds.feature_names.join(","));
    std::fs::write(
        dir.path().join("new.csv"),
        header + &vec!["0.0"; ds.d()].join(","),
    )
    .unwrap();
    let covariates = ds.feature_names.join(",");

    let out = qrlearn(
        dir.path(),
        &[
            "fit",
            "--learner",
            "combined",
            "--trial",
            "trial.csv",
            "--external",
            "external.csv",
            "--predict",
            "new.csv",
            "--propensity",
            "0.5",
            "--covariates",
            &covariates,
            "--out",
            ".",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(
        summary.contains("\"lambda\":") && !summary.contains("\"lambda\":null"),
        "{summary}"
    );
    let preds = read(dir.path().join("predictions.csv"));
    assert_eq!(preds.lines().count(), 2);
    let tau: f64 = preds
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(tau.is_finite());
}

#[test]
fn transport_test_reports_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let draw = generate(&DgpConfig::new(Scenario::Power, 400, 400).with_seed(1, 0)).unwrap();
    draw.dataset
        .write_csv(&dir.path().join("data.csv"))
        .unwrap();
    let out = qrlearn(
        dir.path(),
        &["transport-test", "--data", "data.csv", "--out", "."],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = read(dir.path().join("transport_test.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "method,estimate,se,ci_lo,ci_hi,p_value,rejected");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("\"p_value\""), "{stdout}");
}
