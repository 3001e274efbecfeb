use std::path::Path;
use std::process::{Command, Output};

fn sigmalab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigmalab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn csv_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    let body = text.split_once('\n').unwrap().1;
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn selftest_exits_zero_with_volume_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = sigmalab(&["selftest"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(dir.path());
    let vol = rows.iter().find(|r| r[1] == "sphere_volume" && r[3] == "S3").expect("S3 volume row");
    let v: f64 = vol[4].parse().unwrap();
    assert!((v - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-8);
    assert_eq!(vol[8], "pass");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["exit_code"], 0);
    assert_eq!(summary["counts"]["fail"], 0);
}

#[test]
fn counterexample_reports_witness_for_every_nonzero_t() {
    let dir = tempfile::tempdir().unwrap();
    let out = sigmalab(&["counterexample", "--n", "4", "--lambda", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(dir.path());
    let grid = [-0.2, -0.1, -0.05, -0.02, -0.01, 0.01, 0.02, 0.05, 0.1, 0.2];
    for t in grid {
        let case = format!("n=4,t={t},k=1,l=0");
        let row = rows
            .iter()
            .find(|r| r[1] == "stability_witness" && r[3] == case)
            .unwrap_or_else(|| panic!("missing witness row for t = {t}"));
        assert_eq!(row[8], "pass");
        assert!(row[9].contains("comparison_violated=true"), "{row:?}");
    }
}

#[test]
fn strict_paper_turns_findings_into_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = sigmalab(&["counterexample", "--strict-paper"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_lemmas_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = sigmalab(&["verify-lemmas", "--cases", "20", "--seed", "1"], d.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = std::fs::read(a.path().join("report.csv")).unwrap();
    let rb = std::fs::read(b.path().join("report.csv")).unwrap();
    assert_eq!(ra, rb);
    assert!(ra.starts_with(b"# sigmalab verify-lemmas seed=1\n"));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"seed": 3, "colour": "blue"}"#).unwrap();
    let out = sigmalab(&["selftest", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = sigmalab(&["verify-functional", "--n", "4", "--k", "3", "--l", "2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = sigmalab(&["compare-sphere", "--trials", "10"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 3, "t_grid": [0.05, -0.05]}"#).unwrap();
    let out = sigmalab(&["counterexample", "--config", cfg.to_str().unwrap(), "--seed", "11"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(text.starts_with("# sigmalab counterexample seed=11\n"));
    assert_eq!(csv_rows(dir.path()).iter().filter(|r| r[1] == "stability_witness").count(), 2);
}
