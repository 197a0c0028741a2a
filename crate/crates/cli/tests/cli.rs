use std::path::Path;
use std::process::{Command, Output};

fn earlybird(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earlybird"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = earlybird(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

/// A small dataset that trains in well under a second per epoch.
fn small_dataset(dir: &Path) {
    ok(&[
        "generate", "--out", s(dir), "--n-articles", "150", "--n-users", "400", "--seed", "3",
    ]);
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["generate", "--out", s(&a), "--seed", "7"]);
    ok(&["generate", "--out", s(&b), "--seed", "7"]);
    for f in ["articles.tsv", "engagements.tsv", "features.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(rows(&a.join("articles.tsv")), 600);
}

#[test]
fn generate_without_out_is_a_usage_error() {
    assert_eq!(earlybird(&["generate"]).status.code(), Some(2));
}

#[test]
fn evaluate_without_checkpoint_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(earlybird(&["evaluate", "--data", s(tmp.path())]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let conf = tmp.path().join("bad.conf");
    std::fs::write(&conf, "[train]\nepochs = 0\n").unwrap();
    let out = earlybird(&["train", "--data", s(tmp.path()), "--config", s(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&conf, "[train]\nno_such_key = 1\n").unwrap();
    let out = earlybird(&["train", "--data", s(tmp.path()), "--config", s(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    let out = earlybird(&["train", "--data", s(tmp.path()), "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = earlybird(&["ingest", "--data", s(&tmp.path().join("absent"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ingest_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let out = ok(&["ingest", "--data", s(tmp.path())]);
    assert!(out.lines().any(|l| l == "articles\t150"), "{out}");
}

#[test]
fn split_and_analyze_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let run = tmp.path().join("split");
    ok(&["split", "--data", s(tmp.path()), "--out", s(&run), "--graphs"]);
    assert!(run.join("manifest.toml").exists());
    assert_eq!(rows(&run.join("split.tsv")), 150);
    assert_eq!(rows(&run.join("bands.tsv")), 3);
    for band in ["train", "val", "test"] {
        assert!(run.join(format!("{band}_edge_features.tsv")).exists());
    }

    let run = tmp.path().join("analyze");
    ok(&["analyze", "--data", s(tmp.path()), "--out", s(&run), "--bins", "5"]);
    assert_eq!(rows(&run.join("fna_hist.tsv")), 5);
    assert_eq!(rows(&run.join("fna_hist_by_engagement_class.tsv")), 10);
    assert_eq!(rows(&run.join("fna_hist_by_user_class.tsv")), 10);
    assert_eq!(rows(&run.join("fna_hist_joint.tsv")), 20);
}

#[test]
fn train_then_evaluate_reproduces_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let run = tmp.path().join("train");
    ok(&[
        "train", "--data", s(tmp.path()), "--out", s(&run), "--epochs", "5", "--preset", "gossipcop",
        "-k", "50",
    ]);
    assert_eq!(rows(&run.join("history.tsv")), 5);
    let manifest: toml::Table = std::fs::read_to_string(run.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["command"].as_str(), Some("train"));
    assert_eq!(manifest["config"]["train"]["k"].as_integer(), Some(50));

    let eval = tmp.path().join("eval");
    ok(&[
        "evaluate", "--data", s(tmp.path()), "--checkpoint", s(&run.join("checkpoint.txt")), "--out", s(&eval),
    ]);
    assert_eq!(
        std::fs::read(run.join("metrics.tsv")).unwrap(),
        std::fs::read(eval.join("metrics.tsv")).unwrap()
    );
    assert!(rows(&eval.join("predictions.tsv")) > 0);
}

#[test]
fn ablate_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let run = tmp.path().join("ablate");
    ok(&[
        "ablate", "--data", s(tmp.path()), "--out", s(&run), "--epochs", "3", "-k", "20",
        "--variants", "full,-rank,+rand,-user", "--seeds", "5",
    ]);
    assert_eq!(rows(&run.join("results.tsv")), 20);
    assert_eq!(rows(&run.join("summary.tsv")), 4);
}

#[test]
fn default_run_directory_goes_under_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let root = tmp.path().join("runs");
    let out = Command::new(env!("CARGO_BIN_EXE_earlybird"))
        .args(["split", "--data", s(tmp.path()), "--seed", "9"])
        .env("EARLYBIRD_OUT", &root)
        .output()
        .unwrap();
    assert!(out.status.success());
    let dirs: Vec<_> = std::fs::read_dir(&root).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(dirs.len(), 1);
    let name = dirs[0].to_string_lossy().into_owned();
    assert!(name.starts_with("split-") && name.ends_with("-seed9"), "{name}");
}
