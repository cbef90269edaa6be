use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dezin-solve"));
    c.env_remove("DEZIN_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn solve(mode: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(mode)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(extra)
        .output()
        .unwrap()
}

fn report_value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("{key} missing from report"))
}

fn report_array(report: &str, key: &str) -> Vec<f64> {
    let v = report_value(report, key).trim_start_matches('[').trim_end_matches(']');
    if v.is_empty() {
        return Vec::new();
    }
    v.split(", ").map(|x| x.parse().unwrap()).collect()
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn analyze_reports_engineered_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve("analyze", &configs().join("analyze_resonance.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(dir.path().join("report.txt"));
    assert_eq!(report_value(&r, "resonant_set"), "[1]");
    let lambda0: f64 = report_value(&r, "lambda0").parse().unwrap();
    assert!((lambda0 - std::f64::consts::PI.powi(2)).abs() < 1e-12);
    assert_eq!(report_value(&r, "lambda_class"), "unit_interval");
}

#[test]
fn inverse_round_trip_recovers_first_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve("inverse", &configs().join("inverse_roundtrip.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(dir.path().join("report.txt"));
    let f = report_array(&r, "f");
    assert_eq!(f.len(), 8);
    assert!((f[0] - 1.0).abs() <= 1e-6, "{f:?}");
    assert!(f[1..].iter().all(|c| c.abs() <= 1e-6));

    let csv = read(dir.path().join("f.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,f"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, v) = l.split_once(',').unwrap();
            (x.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 101);
    let (x, v) = rows[50];
    assert_eq!(x, 0.5);
    assert!((v - 2f64.sqrt()).abs() <= 2e-6);
    let res = read(dir.path().join("residuals.txt"));
    assert!(report_value(&res, "overdetermination").parse::<f64>().unwrap() <= 1e-6);
}

#[test]
fn u_grid_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve("forward", &configs().join("forward_manufactured.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = read(dir.path().join("u.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,t,u");
    assert_eq!(lines.len(), 1 + 101 * 201);
    assert!(lines[1].starts_with("0.0000000000000000e0,-1.0000000000000000e0,"));
    assert!(lines.last().unwrap().starts_with("1.0000000000000000e0,1.0000000000000000e0,"));
    // 17 significant digits everywhere
    for field in lines[1..].iter().flat_map(|l| l.split(',')) {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.len(), 18, "{field}");
    }

    let two_d = dir.path().join("2d");
    let o = solve("inverse", &configs().join("inverse_2d.json"), &two_d, &["--modes", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(two_d.join("u.csv"));
    assert!(csv.starts_with("x1,x2,t,u\n"));
    assert_eq!(csv.lines().count(), 1 + 21 * 21 * 41);
    assert!(read(two_d.join("f.csv")).starts_with("x1,x2,f\n"));
    assert_eq!(report_value(&read(two_d.join("report.txt")), "modes"), "6");
}

#[test]
fn non_orthogonal_source_is_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"rho": 0.5, "alpha": 1, "beta": 1, "lambda": 5.1723186203812304e-05, "modes": 4},
            "functions": {"f": {"kind": "const", "c": 1}, "g": {"kind": "const", "c": 1}}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = solve("forward", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let r = read(out.join("report.txt"));
    assert_eq!(report_value(&r, "status"), "no_solution");
    assert_eq!(report_value(&r, "offending_indices"), "[1]");
    assert!(!out.join("u.csv").exists());
}

#[test]
fn config_errors_are_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"problem\": ").unwrap();
    assert_eq!(solve("forward", &bad, dir.path(), &[]).status.code(), Some(3));
    let missing = dir.path().join("missing.json");
    assert_eq!(solve("forward", &missing, dir.path(), &[]).status.code(), Some(3));
    let wrong_mode = configs().join("ml.json");
    assert_eq!(solve("forward", &wrong_mode, dir.path(), &[]).status.code(), Some(3));
    let o = bin().arg("forward").arg("--modes").arg("x").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = bin()
        .env("DEZIN_THREADS", "zero")
        .args(["ml", "--quiet", "--config"])
        .arg(configs().join("ml.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn ml_mode_and_thread_override() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &Path| {
        let o = bin()
            .env("DEZIN_THREADS", threads)
            .args(["ml", "--config"])
            .arg(configs().join("ml.json"))
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&o.stdout).contains("6 Mittag-Leffler values"));
        read(out.join("report.txt"))
    };
    let one = run("1", &dir.path().join("a"));
    let four = run("4", &dir.path().join("b"));
    assert_eq!(one, four);
    let v = report_array(&one, "value");
    assert!((v[2] - 0.427583576155807).abs() <= 1e-12);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("forward_resonant.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(solve("forward", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(solve("forward", &cfg, &b, &[]).status.code(), Some(0));
    for f in ["report.txt", "u.csv", "residuals.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["selftest", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = read(dir.path().join("report.txt"));
    assert_eq!(report_value(&r, "status"), "pass");
    assert_eq!(report_value(&r, "ml_recurrence.status"), "pass");
}
