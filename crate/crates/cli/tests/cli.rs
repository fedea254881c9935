//! End-to-end checks of the command-line pipeline: stage chaining,
//! artifact gating, overrides, exit codes, and repeatability.

use std::path::Path;
use std::process::{Command, Output};

const SMALL_CONFIG: &str = r#"
[paths]
interactions = "data/interactions.csv"
items = "data/items.jsonl"
workdir = "work"

[repr]
d = 8
dgi_epochs = 40
dgi_lr = 0.005

[train]
batch_size = 512
max_epochs = 15
patience = 4
lr = 0.02
early_stop_n = 10

[eval]
ns = [10, 20]
"#;

fn divrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divrec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Config plus a small synthetic dataset in a fresh directory.
fn setup(dir: &Path) {
    std::fs::write(dir.join("divrec.toml"), SMALL_CONFIG).unwrap();
    let out = divrec(
        dir,
        &[
            "make-synthetic",
            "--users",
            "60",
            "--items",
            "40",
            "--categories",
            "6",
            "--seed",
            "5",
        ],
    );
    assert_ok(&out);
}

#[test]
fn all_writes_metrics_and_repeats_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    assert_ok(&divrec(dir.path(), &["all"]));

    let metrics_path = dir.path().join("work/metrics.json");
    let first = std::fs::read(&metrics_path).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["n_values"], serde_json::json!([10, 20]));
    assert!(report["recall"][0].as_f64().unwrap() > 0.0);
    assert!(report["coverage"][1].as_f64().unwrap() > 0.0);

    assert_ok(&divrec(dir.path(), &["all"]));
    let second = std::fs::read(&metrics_path).unwrap();
    assert_eq!(first, second);
}

#[test]
fn evaluate_before_train_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());

    let out = divrec(dir.path(), &["evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("run ingest first"),
        "{}",
        stderr(&out)
    );

    for stage in ["ingest", "preprocess", "embed", "select"] {
        assert_ok(&divrec(dir.path(), &[stage]));
    }
    let out = divrec(dir.path(), &["evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run train first"), "{}", stderr(&out));
}

#[test]
fn override_is_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    assert_ok(&divrec(
        dir.path(),
        &["--override", "train.lr=0.01", "ingest"],
    ));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("work/manifest_ingest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["train"]["lr"], serde_json::json!(0.01));
    assert_eq!(manifest["stage"], serde_json::json!("ingest"));
    assert!(manifest["inputs"]
        .as_object()
        .unwrap()
        .keys()
        .any(|k| k.ends_with("interactions.csv")));
}

#[test]
fn stale_artifacts_warn_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    assert_ok(&divrec(dir.path(), &["ingest"]));

    let out = divrec(dir.path(), &["--override", "train.lr=0.9", "preprocess"]);
    assert_ok(&out);
    assert!(
        stderr(&out).contains("different config"),
        "{}",
        stderr(&out)
    );

    let out = divrec(
        dir.path(),
        &["--force", "--override", "train.lr=0.9", "preprocess"],
    );
    assert_ok(&out);
    assert!(
        !stderr(&out).contains("different config"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn recommend_prints_descending_json_list() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    assert_ok(&divrec(dir.path(), &["all"]));

    let out = divrec(dir.path(), &["recommend", "--user", "u00003", "--n", "5"]);
    assert_ok(&out);
    let line: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(line["user_id"], serde_json::json!("u00003"));
    assert_eq!(line["item_ids"].as_array().unwrap().len(), 5);
    let scores: Vec<f64> = line["scores"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");

    let out = divrec(dir.path(), &["recommend", "--user", "nobody", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown user id"), "{}", stderr(&out));
}

#[test]
fn sweep_writes_rows_and_survives_a_failing_cell() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());

    let out = divrec(
        dir.path(),
        &[
            "sweep", "--beta-u", "0.5", "--beta-u", "0", "--beta-i", "0.1",
        ],
    );
    assert_ok(&out);
    assert!(stderr(&out).contains("beta_u=0"), "{}", stderr(&out));

    let csv = std::fs::read_to_string(dir.path().join("work/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "beta_u,beta_i,selection_us,selection_is,weights,N,recall,hit_ratio_primary,hit_ratio_classic,coverage"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4, "2 cells x 2 values of N");
    let good: Vec<&&str> = rows.iter().filter(|r| r.starts_with("0.5,")).collect();
    assert!(good.iter().all(|r| !r.ends_with(",,,")), "{good:?}");
    let failed: Vec<&&str> = rows.iter().filter(|r| r.starts_with("0,")).collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|r| r.ends_with(",,,")), "{failed:?}");
}

#[test]
fn usage_problems_exit_one_and_data_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());

    let out = divrec(dir.path(), &["--override", "no_equals", "ingest"]);
    assert_eq!(out.status.code(), Some(1));
    let out = divrec(dir.path(), &["--override", "nosuch.key=1", "ingest"]);
    assert_eq!(out.status.code(), Some(1));
    let out = divrec(dir.path(), &["--override", "select.beta_u=-1", "ingest"]);
    assert_eq!(out.status.code(), Some(1));
    let out = divrec(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = divrec(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));

    // A missing input file is a data problem, not a usage problem.
    std::fs::remove_file(dir.path().join("data/interactions.csv")).unwrap();
    let out = divrec(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lock_blocks_second_writer_until_forced() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    std::fs::create_dir_all(dir.path().join("work")).unwrap();
    std::fs::write(dir.path().join("work/.divrec.lock"), "held\n").unwrap();

    let out = divrec(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("locked"), "{}", stderr(&out));

    assert_ok(&divrec(dir.path(), &["--force", "ingest"]));
    // The lock is released afterwards, so a plain rerun works too.
    assert_ok(&divrec(dir.path(), &["ingest"]));
}
