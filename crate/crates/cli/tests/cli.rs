use std::fs;
use std::path::Path;
use std::process::Command;

fn micv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_micv"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn small_config(out: &Path, k_values: &str, replicates: usize) -> String {
    format!(
        "[input]\nscenario = cll-like\nn = 80\n\n[design]\napproaches = 1,2,3\nk_values = {k_values}\n\
         folds = 4\nreplicates = {replicates}\n\n[imputation]\nsweeps = 3\n\n[run]\nseed = 5\noutput = {}\n",
        out.display()
    )
}

#[test]
fn single_imputation_files_identical_across_approaches() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let cfg = write_config(dir.path(), &small_config(&out, "1", 2));
    let status = micv(&["run", "--config", &cfg]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let read = |a: u8| fs::read(out.join(format!("predictions_a{a}_k1.csv"))).unwrap();
    assert_eq!(read(1), read(2));
    assert_eq!(read(1), read(3));
}

#[test]
fn one_replicate_leaves_spread_undefined() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let cfg = write_config(dir.path(), &small_config(&out, "2", 1));
    assert!(micv(&["run", "--config", &cfg]).status.success());
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let r_rows: Vec<&str> = metrics.lines().filter(|l| l.contains(",r_percent,")).collect();
    assert_eq!(r_rows.len(), 3 * 2);
    assert!(r_rows.iter().all(|l| l.ends_with(",NA")));
    let brier: Vec<&str> = metrics.lines().filter(|l| l.contains(",full,brier_mean,")).collect();
    assert_eq!(brier.len(), 3);
    assert!(brier.iter().all(|l| !l.ends_with("NA")));
}

#[test]
fn reruns_are_bit_identical_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = write_config(dir.path(), &small_config(&a, "1,3", 2));
    assert!(micv(&["run", "--config", &cfg, "--parallelism", "1"]).status.success());
    let b_str = b.to_str().unwrap();
    assert!(micv(&["run", "--config", &cfg, "--parallelism", "3", "--output", b_str])
        .status
        .success());
    for name in ["metrics.csv", "predictions_a2_k3.csv", "data.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn report_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let cfg = write_config(dir.path(), &small_config(&out, "1,2", 2));
    assert!(micv(&["run", "--config", &cfg]).status.success());
    let tables = dir.path().join("tables");
    let status = micv(&["report", "--results", out.to_str().unwrap(), "--out", tables.to_str().unwrap()]);
    assert!(status.status.success());
    let brier = fs::read_to_string(tables.join("brier_vs_k.csv")).unwrap();
    assert_eq!(brier.lines().count(), 1 + 3 * 2 * 3);
    let r = fs::read_to_string(tables.join("r_vs_k.csv")).unwrap();
    assert_eq!(r.lines().count(), 1 + 3 * 2);
    assert!(r.lines().skip(1).all(|l| l.split(',').nth(1) == Some("2")));
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("crt.csv");
    let status = micv(&["simulate", "--scenario", "crt-like", "--n", "50", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(status.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(text.lines().next().unwrap().ends_with(",event"));
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!micv(&["report", "--results", dir.path().to_str().unwrap()]).status.success());
    let cfg = write_config(dir.path(), "[design]\nk_values = 1000\n");
    let out = micv(&["run", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("desk-scale"));
    assert!(!micv(&["simulate", "--scenario", "nope", "--out", "x.csv"]).status.success());
}

#[test]
fn failing_cell_reports_coordinates() {
    // More folds than rows: every cell fails its plan check.
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "a,b,y\n0.5,1,0\nNA,0,1\n1.5,1,1\n2.5,0,0\n").unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "[input]\ncsv = d.csv\noutcome = y\n[design]\napproaches = 2\nk_values = 2\nfolds = 5\nreplicates = 1\n[run]\noutput = {}\n",
            dir.path().join("o").display()
        ),
    );
    let out = micv(&["run", "--config", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("approach=2, K=2, replicate=1"), "{err}");
}
