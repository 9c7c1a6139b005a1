use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn h2conformal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_h2conformal")).args(args).output().expect("binary runs")
}

fn small_schrodinger(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec!["schrodinger", "--n-grid", "200", "--r", "4,8", "--t-final", "0.2", "--out", out];
    args.extend_from_slice(extra);
    h2conformal(&args)
}

#[test]
fn converged_run_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_schrodinger(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("schrodinger (n = 200)"));
    let errors = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    let rows: Vec<&str> = errors.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for (row, r) in rows.iter().zip(["4", "8"]) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], r);
        assert!(fields[1].parse::<f64>().unwrap() > 0.0);
        assert_eq!(fields[3], "true");
    }
    for name in ["report.json", "shifts_r4.csv", "shifts_r8.csv", "trajectory_fom.csv", "trajectory_r8.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn unconverged_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_schrodinger(dir.path(), &["--maxit", "1", "--tol", "1e-14", "--no-sim"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(dir.path().join("errors.csv")).unwrap().contains(",false"));
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["schrodinger", "--map", "square", "--out", d],
        vec!["schrodinger", "--r", "3", "--out", d],
        vec!["custom", "--out", d],
        vec!["custom", "--config", "/nonexistent/run.cfg"],
        vec!["wave", "--on-escape", "ignore", "--out", d],
    ] {
        let out = h2conformal(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn config_file_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "model = schrodinger\nn_grid = many\n").unwrap();
    let out = h2conformal(&["custom", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn custom_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!("model = synthetic\nsynthetic_poles = 12\nmap = mobius-disk\nr = 2\nsimulate = false\nseed = 3\nshift_file = {}\noutput_dir = {}\n",
            dir.path().join("s.txt").display(), dir.path().display()),
    )
    .unwrap();
    fs::write(dir.path().join("s.txt"), "2,0\n-2,0.5\n").unwrap();
    let out = h2conformal(&["custom", "--config", cfg.to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&out.stderr));
    let shifts = fs::read_to_string(dir.path().join("shifts_r2.csv")).unwrap();
    assert!(shifts.starts_with("iteration,index,re,im\n0,0,2,0\n0,1,-2,0.5\n"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(small_schrodinger(dir.path(), &["--seed", "3", "--jobs", "2"]).status.code(), Some(0));
    }
    for name in ["errors.csv", "shifts_r4.csv", "shifts_r8.csv", "trajectory_fom.csv", "trajectory_r4.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}
