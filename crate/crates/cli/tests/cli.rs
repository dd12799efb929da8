use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_KOVASZNAY: &str = "study = \"kovasznay\"\nmeshes = [11, 21]\nmethods = [\"st\"]\n";

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutcell-lab"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .env_remove("CUTCELL_OUT")
        .output()
        .expect("binary runs")
}

fn csvs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map(|it| it.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    v.retain(|n| n.ends_with(".csv"));
    v.sort();
    v
}

#[test]
fn kovasznay_run_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("k.cfg"), SMALL_KOVASZNAY).unwrap();
    let out = lab(&["kovasznay", "--config", "k.cfg", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = tmp.path().join("res/kovasznay_p1_st.csv");
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));
    assert!(tmp.path().join("res/kovasznay_p1_st.summary.txt").exists());
    // The config echo is printed.
    assert!(String::from_utf8_lossy(&out.stdout).contains("study = \"kovasznay\""));
}

#[test]
fn bad_config_exits_1_without_report() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.cfg"), "study = \"kovasznay\"\nfo = \"bar\"\n").unwrap();
    let out = lab(&["kovasznay", "--config", "bad.cfg", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fo"));
    assert!(csvs(&tmp.path().join("res")).is_empty());

    for args in [
        vec!["kovasznay", "--config", "missing.cfg"],
        vec!["kovasznay", "--degree", "3"],
        vec!["kovasznay", "--levels", "2,13"],
        vec!["square", "--config", "bad.cfg"],
        vec!["kovasznay", "--method", "xx"],
    ] {
        let out = lab(&args, tmp.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn study_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("k.cfg"), SMALL_KOVASZNAY).unwrap();
    let out = lab(&["square", "--config", "k.cfg", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn newton_divergence_exits_2_with_partial_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL_KOVASZNAY}[solver]\nmax_iterations = 1\n");
    fs::write(tmp.path().join("k.cfg"), cfg).unwrap();
    let out = lab(&["kovasznay", "--config", "k.cfg", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let text = fs::read_to_string(tmp.path().join("res/kovasznay_p1_st.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("failed: Newton iteration did not converge"));
}

#[test]
fn deterministic_csv_without_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL_KOVASZNAY}deterministic = true\n");
    fs::write(tmp.path().join("k.cfg"), cfg).unwrap();
    let mut reports = Vec::new();
    for dir in ["a", "b"] {
        let out = lab(&["kovasznay", "--config", "k.cfg", "--out", dir, "--no-timings", "--method", "st,ai", "--levels", "2"], tmp.path());
        assert_eq!(out.status.code(), Some(0));
        reports.push(fs::read(tmp.path().join(dir).join("kovasznay_p1_st_ai2.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("k.cfg"), SMALL_KOVASZNAY).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cutcell-lab"))
        .args(["kovasznay", "--config", "k.cfg", "--quiet"])
        .current_dir(tmp.path())
        .env("CUTCELL_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csvs(&tmp.path().join("from_env")), vec!["kovasznay_p1_st.csv"]);
}

#[test]
fn quadrature_study_runs_from_flags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("q.cfg"), "study = \"quadrature\"\nmeshes = [11]\n").unwrap();
    let out = lab(&["quadrature", "--config", "q.cfg", "--out", "q", "--levels", "1,2,3", "--no-timings"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("q/quadrature_p1_st_ai1-2-3.csv")).unwrap();
    assert!(text.contains("\npentagon,1,st,,"));
    assert!(text.contains("\nsphere,2.5,ai,3,"));
    assert!(text.contains("\nkovasznay-11,"));
}
