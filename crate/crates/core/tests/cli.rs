use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn crossdiff(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_crossdiff")).args(args).arg("--config").arg(&cfg).output().expect("binary runs")
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const SHORT_EVOLVE: &str = "delta = -0.9\nn_cells = 100\nt_end = 0.5\noutput_times = 0.1, 0.5\n";

#[test]
fn evolve_writes_snapshots_trace_and_plots() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(tmp.path(), "a");
    let res = crossdiff(&["evolve", "--out", &out], SHORT_EVOLVE, tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["manifest.txt", "trace.csv", "snapshot_000.csv", "snapshot_001.svg", "final.csv", "energy.svg", "summary.txt"] {
        assert!(Path::new(&out).join(f).exists(), "missing {f}");
    }
    let trace = fs::read_to_string(Path::new(&out).join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,energy,mass_rho,mass_eta,overlap\n"));
    let snap = fs::read_to_string(Path::new(&out).join("snapshot_000.csv")).unwrap();
    assert!(snap.starts_with("x,rho,eta,sigma\n"));
    assert_eq!(snap.lines().count(), 101);
}

#[test]
fn reruns_are_byte_identical_and_manifest_replays() {
    let tmp = TempDir::new().unwrap();
    let cfg = "initial = random\nseed = 3\ndelta = 0.5\nn_cells = 80\nt_end = 0.2\noutput_times = 0.2\nplots = false\n";
    let a = out_arg(tmp.path(), "a");
    let b = out_arg(tmp.path(), "b");
    assert_eq!(crossdiff(&["evolve", "--out", &a], cfg, tmp.path()).status.code(), Some(0));
    assert_eq!(crossdiff(&["evolve", "--out", &b], cfg, tmp.path()).status.code(), Some(0));
    for f in ["snapshot_000.csv", "trace.csv", "manifest.txt"] {
        assert_eq!(fs::read(Path::new(&a).join(f)).unwrap(), fs::read(Path::new(&b).join(f)).unwrap(), "{f}");
    }

    let manifest = fs::read_to_string(Path::new(&a).join("manifest.txt")).unwrap();
    assert!(manifest.contains("subcommand = evolve"));
    assert!(manifest.contains("seed = 3"));
    let c = out_arg(tmp.path(), "c");
    let res = crossdiff(&["--out", &c], &manifest, tmp.path());
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(fs::read(Path::new(&a).join("trace.csv")).unwrap(), fs::read(Path::new(&c).join("trace.csv")).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = "initial = random\nseed = 1\ndelta = 0.5\nn_cells = 80\nt_end = 0.1\nplots = false\n";
    let a = out_arg(tmp.path(), "a");
    let b = out_arg(tmp.path(), "b");
    crossdiff(&["evolve", "--out", &a], cfg, tmp.path());
    crossdiff(&["evolve", "--out", &b, "--seed", "2"], cfg, tmp.path());
    let ia = fs::read(Path::new(&a).join("initial.csv")).unwrap();
    let ib = fs::read(Path::new(&b).join("initial.csv")).unwrap();
    assert_ne!(ia, ib);
    assert!(fs::read_to_string(Path::new(&b).join("manifest.txt")).unwrap().contains("seed = 2"));
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(tmp.path(), "x");
    for cfg in ["delta = -1.5\n", "colour = blue\n", "n_cells = 1\n", "kernel = gauss\nenergy = nonlocal\n", "just words\n"] {
        let res = crossdiff(&["evolve", "--out", &out], cfg, tmp.path());
        assert_eq!(res.status.code(), Some(2), "{cfg:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let res = crossdiff(&["critical", "--out", &out], "delta = -0.5\nalpha = 2\n", tmp.path());
    assert_eq!(res.status.code(), Some(2));
    let res = Command::new(env!("CARGO_BIN_EXE_crossdiff")).args(["evolve", "--bogus"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn solver_abort_exits_with_3() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(tmp.path(), "x");
    let cfg = "delta = 0.9\nn_cells = 400\nt_end = 1\ndt_max = 0.1\nmin_dt = 0.05\n";
    let res = crossdiff(&["evolve", "--out", &out], cfg, tmp.path());
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn critical_prints_summary_row() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(tmp.path(), "c");
    let res = crossdiff(&["critical", "--out", &out], "kernel = picard\nalpha = 5\ndelta = -0.9\nhalf_length = 10\n", tmp.path());
    assert_eq!(res.status.code(), Some(0));
    let line = String::from_utf8(res.stdout).unwrap();
    let cols: Vec<&str> = line.trim().split(',').collect();
    assert_eq!(cols.len(), 8);
    assert_eq!(cols[0], "picard");
    let r: f64 = cols[5].parse().unwrap();
    assert!((r - 1.1032).abs() < 1e-3);
    let csv = fs::read_to_string(Path::new(&out).join("critical.csv")).unwrap();
    assert!(csv.starts_with("kernel,alpha,delta,L,r_raw,r,mass_rho,el_residual\n"));
    assert!(Path::new(&out).join("profile.svg").exists());
}

#[test]
fn gapscan_rows_follow_parameter_order() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(tmp.path(), "g");
    let cfg =
        "kernel = indicator\nalpha = 2\nn_cells = 200\ninitial = half_blocks\ndelta_min = -0.95\ndelta_max = -0.55\ndelta_count = 5\n";
    let res = crossdiff(&["gapscan", "--out", &out], cfg, tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(Path::new(&out).join("gapscan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,r_measured,r_formula"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    let dx = 0.04;
    for r in &rows {
        assert!((r[1] - r[2]).abs() <= 2.0 * dx, "{r:?}");
    }
}

#[test]
fn compare_reduced_reports_small_difference() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(tmp.path(), "cmp");
    let res = crossdiff(&["compare", "--out", &out], "delta = -0.9\nn_cells = 200\nt_end = 1\noutput_times = 0.5, 1\n", tmp.path());
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    let value: f64 = stdout.trim().strip_prefix("max_l1=").unwrap().parse().unwrap();
    assert!(value < 5e-2);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        crossdiff::cli::ExperimentConfig::parse(&text, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 10);
}
