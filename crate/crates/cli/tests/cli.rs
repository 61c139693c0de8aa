use std::path::Path;
use std::process::{Command, Output};

fn besqlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_besqlab"))
        .args(args)
        .env("BESQLAB_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn parse_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn sample_gamma_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = besqlab(dir.path(), &["sample", "gamma", "--r", "2", "--n", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_csv(&dir.path().join("sample_gamma.csv"));
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r[0] > 0.0));
}

#[test]
fn sample_besq0_reports_mean_near_delta_x() {
    let dir = tempfile::tempdir().unwrap();
    let o = besqlab(dir.path(), &["sample", "besq0", "--delta", "2", "--x", "0.5", "--n", "20000"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mean: f64 = out
        .split_whitespace()
        .skip_while(|w| *w != "mean")
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    // sd of the mean is 1/√20000.
    assert!((mean - 1.0).abs() < 0.03, "{out}");
}

#[test]
fn parameter_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["sample", "absorption_time", "--delta", "-1", "--v", "1"][..],
        &["sample", "nonsense"],
        &["sample", "gamma"],
        &["verify", "E99"],
        &["verify", "E1", "--n", "50"],
        &["embed", "--delta", "1", "--levels", "0.5,0.25"],
    ] {
        let o = besqlab(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn embed_writes_consistent_and_reproducible_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["embed", "--delta", "1", "--v", "1", "--n", "200", "--seed", "3", "--levels", "0.25,0.5"];
    let o = besqlab(a.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("gamma = 1/(1+delta) = 0.5"));
    assert_eq!(besqlab(b.path(), &args).status.code(), Some(0));

    for f in ["profiles.csv", "zeta.csv", "figure.csv", "frontier.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }

    let rows = parse_csv(&a.path().join("profiles.csv"));
    assert_eq!(rows.len(), 400);
    for r in &rows {
        // replicate, level, yd, ymix, yv, ltau
        assert!((r[3] + r[4] - r[5]).abs() <= 1e-12 * r[5].max(1.0));
    }
    assert_eq!(parse_csv(&a.path().join("zeta.csv")).len(), 200);
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 10\nseed = 11\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = besqlab(dir.path(), &["--config", c, "sample", "gamma", "--r", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(parse_csv(&dir.path().join("sample_gamma.csv")).len(), 10);
    let o = besqlab(dir.path(), &["--config", c, "sample", "gamma", "--r", "1", "--n", "25"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(parse_csv(&dir.path().join("sample_gamma.csv")).len(), 25);

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = besqlab(dir.path(), &["--config", c, "identity"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_writes_report_and_exits_zero_on_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = besqlab(dir.path(), &["verify", "E9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("E9.json")).unwrap()).unwrap();
    assert_eq!(report["experiment_id"], "E9");
    assert!(report["tests"].as_array().unwrap().iter().all(|t| t["passed"] == true));
}

#[test]
fn strict_tolerance_makes_verify_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // A tolerance of a millionth of a standard error cannot be met.
    let o = besqlab(dir.path(), &["verify", "E8", "--tolerance-se", "1e-6", "--n", "200"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn identity_and_listing() {
    let dir = tempfile::tempdir().unwrap();
    let o = besqlab(dir.path(), &["identity"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("PASS").count(), 3);

    let o = besqlab(dir.path(), &["list-experiments", "--json"]);
    let list: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(list.as_array().unwrap().len(), 9);

    let help = stdout(&besqlab(dir.path(), &["--help"]));
    for id in ["E1", "E5", "E9"] {
        assert!(help.contains(id));
    }
}

#[test]
fn simulate_path_absorbs_negative_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = besqlab(dir.path(), &["simulate-path", "--delta", "-2", "--y", "0.5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = parse_csv(&dir.path().join("path.csv"));
    assert_eq!(rows.len(), 1001);
    let first_zero = rows.iter().position(|r| r[1] == 0.0);
    if let Some(k) = first_zero {
        assert!(rows[k..].iter().all(|r| r[1] == 0.0));
    }
    assert!(rows.iter().all(|r| r[1] >= 0.0));
}
