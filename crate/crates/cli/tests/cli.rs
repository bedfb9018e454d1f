use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_follicle"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key = ...` in the first section of a report that has it.
fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
        .to_string()
}

fn num(report: &str, key: &str) -> f64 {
    field(report, key).parse().unwrap()
}

fn list(report: &str, key: &str) -> Vec<f64> {
    field(report, key)
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().unwrap())
        .collect()
}

const EXIT_W: f64 = 1.160_909_576_912_811_5;

#[test]
fn simulate_default_single_mass() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "cs = 1.0\n");
    let out = dir.path().join("out");
    let o = run(&["simulate"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let exits = list(&stdout(&o), "exit_times");
    assert!((exits[0] - EXIT_W).abs() < 1e-9);
    for f in ["trajectory.csv", "moment.csv", "summary.txt"] {
        let body = fs::read_to_string(out.join(f)).unwrap();
        assert!(body.starts_with(&format!("# follicle {}\n# config-sha256 ", env!("CARGO_PKG_VERSION"))), "{f}");
    }
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = traj.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 402);
    assert_eq!(rows[0], "t,x1_0,x2_0,x3_0");
}

#[test]
fn malformed_csv_names_the_row() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "e.csv", "x1,x2,x3\n0,1,1\n0,two,1\n");
    let cfg = write(dir.path(), "c.toml", "cs = 1.0\nensemble = \"e.csv\"\n");
    let o = run(&["simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("two"), "{err}");
}

#[test]
fn invalid_horizon_fails_before_any_work() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "cs = 1.0\nt0 = 2.0\nt1 = 1.0\n");
    let out = dir.path().join("out");
    let o = run(&["sweep"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t1"));
    assert!(!out.exists());
}

#[test]
fn sweep_single_mass_regimes() {
    let dir = TempDir::new().unwrap();
    let strong = write(dir.path(), "s.toml", "cs = 7.0\n[sweep]\ngrid = 4096\n");
    let o = run(&["sweep"], &strong, &dir.path().join("a"));
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = stdout(&o);
    assert!((num(&rep, "argmin") - EXIT_W).abs() <= 17.0 / 4095.0);
    assert!((num(&rep, "tstar") - EXIT_W).abs() < 1e-6);
    let svg = fs::read_to_string(dir.path().join("a/sweep.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains("config-sha256"));

    write(dir.path(), "late.csv", "0,5,1\n");
    let weak = write(dir.path(), "w.toml", "cs = 0.1\nt1 = 0.4\nensemble = \"late.csv\"\n");
    let o = run(&["sweep"], &weak, &dir.path().join("b"));
    assert!(o.status.success());
    assert_eq!(num(&stdout(&o), "argmin"), 0.0);
}

#[test]
fn sweep_two_masses_has_interior_optimum() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "e.csv", "x1,x2,x3\n0,0,1\n0,3,1\n");
    let cfg = write(dir.path(), "c.toml", "cs = 0.8\nt1 = 1.3\nensemble = \"e.csv\"\n");
    let out = dir.path().join("out");
    let o = run(&["sweep"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = stdout(&o);
    assert_eq!(field(&rep, "segments"), "3");
    let exits = list(&rep, "exit_times");
    let t = num(&rep, "tstar");
    assert!(exits[0] < t && t < exits[1]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let segs: std::collections::BTreeSet<&str> = csv
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(segs.len(), 3);
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "g.toml", "cs = 7.0\n");
    let o = run(&["verify"], &good, &dir.path().join("a"));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let cert = fs::read_to_string(dir.path().join("a/certificate.txt")).unwrap();
    assert!(cert.contains("[overall]\npass = true"));

    let far = write(dir.path(), "f.toml", "cs = 7.0\n[verify]\ntstar = 0.5\n");
    let o = run(&["verify"], &far, &dir.path().join("b"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("sign_pattern") && l.ends_with("FAIL")));

    let weak = write(dir.path(), "w.toml", "cs = 1.0\n[verify]\ntstar = 0.5\n");
    let o = run(&["verify"], &weak, &dir.path().join("c"));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("hypotheses not satisfied"));
}

#[test]
fn converge_reports() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rho.csv", "nx,ny,ys\n2,2,6\n1,1\n1,1\n");
    let dens = write(
        dir.path(),
        "d.toml",
        "cs = 7.0\ndensity = \"rho.csv\"\n[converge]\ntstar = 1.1609095769128115\n",
    );
    let o = run(&["converge"], &dens, &dir.path().join("a"));
    assert!(o.status.success(), "{}", stderr(&o));
    let errs = list(&stdout(&o), "errors");
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");

    let single = write(dir.path(), "s.toml", "cs = 7.0\n");
    let o = run(&["converge"], &single, &dir.path().join("b"));
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = stdout(&o);
    assert_eq!(field(&rep, "inside_largest_two"), "true");
    let errs = list(&rep, "errors");
    assert!(errs.iter().all(|&e| e == errs[0]));
    let table = fs::read_to_string(dir.path().join("b/mollifier.csv")).unwrap();
    assert!(table.contains("i,A_i,Delta_i,bracket_lo,bracket_hi,inside,layer_width"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "cs = 7.0\n[sweep]\ngrid = 512\ntrials = 300\n");
    let a = run(&["sweep", "--threads", "2"], &cfg, &dir.path().join("a"));
    let b = run(&["sweep"], &cfg, &dir.path().join("b"));
    assert!(a.status.success() && b.status.success());
    for f in ["sweep.csv", "sweep.svg", "sweep_report.txt"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "cs = 7.0\n[sweep]\ntrials = 50\n");
    let o = run(&["sweep", "--grid", "64", "--seed", "9"], &cfg, &dir.path().join("a"));
    assert!(o.status.success());
    let rep = stdout(&o);
    assert_eq!(field(&rep, "grid"), "64");
    assert_eq!(field(&rep, "seed"), "9");
    let o = run(&["sweep", "--grid", "1"], &cfg, &dir.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
}
