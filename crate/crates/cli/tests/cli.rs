use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SYMEXP: &str = r#"{"levy": {"family": "symexp", "params": {"lambda": 1.0}}, "a": 0.0, "eta": "lemma"}"#;

fn freesd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freesd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

/// `key=value` lookup in a line of `key=value` pairs.
fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
        .parse()
        .unwrap()
}

#[test]
fn density_writes_increasing_boundary_and_symmetric_mode() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "symexp.json", SYMEXP);
    let out = dir.path().join("density.csv");
    let o = freesd(&["density", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    assert!(line.starts_with("mass="), "{line}");
    assert!((field(&line, "mass") - 1.0).abs() < 1e-2);
    assert!(field(&line, "mode").abs() < 1e-6);
    assert!(field(&line, "fmax") > 0.0);

    let (header, rows) = read_csv(&out);
    assert_eq!(header, "x,v,xi,f");
    assert!(rows.len() >= 512);
    assert!(rows.windows(2).all(|w| w[1][2] > w[0][2]));
}

#[test]
fn truncated_domain_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "cut.json",
        r#"{"levy": {"family": "symexp"}, "grid": {"x_max": 0.5}}"#,
    );
    let o = freesd(&["density", "--config", s(&cfg), "--out", s(&dir.path().join("d.csv"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mass"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("unknown.json", r#"{"levy": {"family": "gamma"}}"#),
        ("malformed.json", r#"{"levy": "#),
        ("extra.json", r#"{"levy": {"family": "symexp"}, "beta": 1}"#),
        ("semicircle.json", r#"{"levy": {"family": "zero"}, "a": 1.0}"#),
        ("negative.json", r#"{"levy": {"family": "symexp", "params": {"lambda": -1}}}"#),
        ("tolerance.json", r#"{"levy": {"family": "symexp"}, "tolerances": {"solve_v": 0}}"#),
    ];
    for (name, text) in cases {
        let cfg = write_config(&dir, name, text);
        let o = freesd(&["density", "--config", s(&cfg), "--out", s(&dir.path().join("d.csv"))]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = freesd(&["density", "--config", s(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cumulants_of_symexp() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "symexp.json", SYMEXP);
    let out = dir.path().join("cumulants.csv");
    let o = freesd(&["cumulants", "--config", s(&cfg), "--order", "4", "--out", s(&out)]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(header, "n,kappa,moment");
    for (row, (kappa, m)) in rows.iter().zip([(0.0, 0.0), (2.0, 2.0), (0.0, 0.0), (12.0, 20.0)]) {
        assert!((row[1] - kappa).abs() < 1e-8, "{row:?}");
        assert!((row[2] - m).abs() < 1e-8, "{row:?}");
    }
    // the table on stdout carries the same numbers
    let printed: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    for (p, row) in printed.iter().zip(&rows) {
        assert!((p - row[1]).abs() <= 1e-14 * row[1].abs().max(1e-12));
    }
}

#[test]
fn narrow_gaussian_cumulant_and_order_cap() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "gauss.json",
        r#"{"levy": {"family": "gauss-scaled", "params": {"a": 1, "n": 64}}}"#,
    );
    let o = freesd(&["cumulants", "--config", s(&cfg), "--order", "2"]);
    assert!(o.status.success());
    let kappa2: f64 = stdout(&o).lines().nth(2).unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((kappa2 - 1.0).abs() < 1e-3);
    let o = freesd(&["cumulants", "--config", s(&cfg), "--order", "13"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_symexp_passes_every_check() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "symexp.json", SYMEXP);
    let report = dir.path().join("report.txt");
    let o = freesd(&["verify", "--config", s(&cfg), "--out", s(&report)]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(fs::read_to_string(&report).unwrap(), text);
    for line in text.lines() {
        assert!(line.starts_with("check="), "{line}");
        assert!(line.contains("pass=true"), "{line}");
    }
    let gh = text.lines().find(|l| l.starts_with("check=gh_identity")).unwrap();
    assert!(field(gh, "residual") <= 1e-8);
    let angular = text.lines().find(|l| l.starts_with("check=angular_r1")).unwrap();
    let cos = field(&angular.replace('"', ""), "cos_theta_r");
    assert!(cos.abs() < 0.7072);
    for name in ["crossvalidate", "unimodal", "level_crossings_0.5", "positivity", "monotone"] {
        assert!(text.contains(&format!("check={name} ")), "{name}");
    }
}

#[test]
fn verify_rejects_non_monotone_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "table.json",
        r#"{"levy": {"family": "table", "table": {"t": [-2, -1, 1, 2], "k": [0.1, 0.5, 0.4, 0.6]}}}"#,
    );
    let o = freesd(&["verify", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("monotone"));
}

#[test]
fn output_is_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "symexp.json", SYMEXP);
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let out = dir.path().join(format!("d{}.csv", outputs.len()));
        let o = Command::new(env!("CARGO_BIN_EXE_freesd"))
            .args(["density", "--config", s(&cfg), "--out", s(&out)])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        outputs.push((fs::read(&out).unwrap(), o.stdout));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn golden_density_matches() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d.csv");
    let o = freesd(&["density", "--config", s(&golden.join("symexp_fixed.json")), "--out", s(&out)]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&out);
    let (golden_header, golden_rows) = read_csv(&golden.join("symexp_fixed.csv"));
    assert_eq!(header, golden_header);
    assert_eq!(rows.len(), golden_rows.len());
    for (row, want) in rows.iter().zip(&golden_rows) {
        for (a, b) in row.iter().zip(want) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-3), "{row:?} vs {want:?}");
        }
    }
    // independent of the frozen file: at x = 0 the symmetric law has
    // xi = 0 and f = 1 / (pi v)
    let mid = &rows[rows.len() / 2];
    assert_eq!(mid[0], 0.0);
    assert!(mid[2].abs() < 1e-12);
    assert!((mid[3] - 1.0 / (std::f64::consts::PI * mid[1])).abs() < 1e-14);
}

#[test]
fn mollify_reports_convergence() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "symexp.json", SYMEXP);
    let out = dir.path().join("mollified");
    let o = freesd(&["mollify", "--config", s(&cfg), "--n-list", "8,16,32", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("convergence.txt")).unwrap();
    assert_eq!(report, stdout(&o));
    let sigma: Vec<f64> = report.lines().map(|l| field(l, "sigma_distance")).collect();
    assert_eq!(sigma.len(), 3);
    assert!(sigma.windows(2).all(|w| w[1] < w[0]), "{sigma:?}");
    for n in [8, 16, 32] {
        let (header, rows) = read_csv(&out.join(format!("density_n{n}.csv")));
        assert_eq!(header, "x,v,xi,f");
        assert!(rows.windows(2).all(|w| w[1][2] > w[0][2]));
    }
    for line in report.lines() {
        assert!((field(line, "mass") - 1.0).abs() <= 1e-2);
    }
}

fn mollified_density(dir: &TempDir, config: &str, n: &str) -> Vec<Vec<f64>> {
    let cfg = write_config(dir, "base.json", config);
    let out = dir.path().join("out");
    let o = freesd(&["mollify", "--config", s(&cfg), "--n-list", n, "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    read_csv(&out.join(format!("density_n{n}.csv"))).1
}

#[test]
fn mollified_gaussian_part_gives_semicircle() {
    let dir = TempDir::new().unwrap();
    let rows = mollified_density(&dir, r#"{"levy": {"family": "zero"}, "a": 1.0}"#, "64");
    let semicircle = |xi: f64| (4.0 - xi * xi).max(0.0).sqrt() / (2.0 * std::f64::consts::PI);
    let worst = rows
        .iter()
        .filter(|r| r[2].abs() <= 1.8)
        .map(|r| (r[3] - semicircle(r[2])).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 2e-2, "{worst}");
}

#[test]
fn mollified_cauchy_density_is_cauchy_after_alignment() {
    let dir = TempDir::new().unwrap();
    let rows = mollified_density(&dir, r#"{"levy": {"family": "cauchy"}}"#, "128");
    // median of the trapezoid distribution function
    let mut cdf = vec![0.0];
    for w in rows.windows(2) {
        let last = *cdf.last().unwrap();
        cdf.push(last + 0.5 * (w[0][3] + w[1][3]) * (w[1][2] - w[0][2]));
    }
    let half = 0.5 * cdf.last().unwrap();
    let i = cdf.partition_point(|&c| c < half);
    let median = rows[i - 1][2] + (rows[i][2] - rows[i - 1][2]) * (half - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
    let cauchy = |xi: f64| 1.0 / (std::f64::consts::PI * (1.0 + xi * xi));
    let worst = rows
        .iter()
        .map(|r| (r[2] - median, r[3]))
        .filter(|(xi, _)| xi.abs() <= 3.0)
        .map(|(xi, f)| (f - cauchy(xi)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 5e-2, "{worst}");
}
