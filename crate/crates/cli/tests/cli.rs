use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hughes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hughes")).args(args).output().unwrap()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn symmetric_demo_keeps_xi_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = hughes(&[
        "simulate",
        "--config",
        s(&scenario("symmetric.toml")),
        "--cells",
        "40",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let xi = fs::read_to_string(dir.path().join("xi.csv")).unwrap();
    let mut lines = xi.lines();
    assert_eq!(lines.next(), Some("t,xi,slope"));
    for line in lines {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
    for f in ["snapshots.csv", "diagnostics.json", "manifest.json", "scenario.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("constraints.csv").exists());
}

#[test]
fn missing_cost_section_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("symmetric.toml")).unwrap();
    let broken = text.replace("[cost]\nkind = \"affine\"\nalpha = 1.0\n", "");
    let cfg = dir.path().join("broken.toml");
    fs::write(&cfg, broken).unwrap();
    let out = hughes(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[cost]"), "{err}");
}

#[test]
fn validation_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("symmetric.toml")).unwrap();
    let cfg = dir.path().join("narrow.toml");
    fs::write(&cfg, text.replace("half_width = 3.0", "half_width = 1.5")).unwrap();
    let out = hughes(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain boundary"));
}

#[test]
fn same_config_twice_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = hughes(&[
            "simulate",
            "--config",
            s(&scenario("capacity_drop.toml")),
            "--cells",
            "40",
            "--out",
            s(d.path()),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in [
        "snapshots.csv",
        "xi.csv",
        "constraints.csv",
        "diagnostics.json",
        "manifest.json",
        "scenario.toml",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn clamped_run_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("one_sided.toml")).unwrap();
    let repelling = text.replace("kind = \"equilibrium\"", "kind = \"relaxed\"\nepsilon = 0.5");
    let cfg = dir.path().join("repelling.toml");
    fs::write(&cfg, repelling).unwrap();
    let out = hughes(&[
        "simulate",
        "--config",
        s(&cfg),
        "--cells",
        "20",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(dir.path().join("o/manifest.json")).unwrap();
    assert!(manifest.contains("\"non_conforming\""));
}

#[test]
fn riemann_table() {
    let out = hughes(&[
        "riemann", "--left", "0", "--right", "0.8", "--points", "5", "--from", "-1", "--to", "1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "x,rho");
    assert_eq!(rows.len(), 6);
    // shock at x = 0.2 for t = 1
    assert!(rows[3].ends_with(",0.0000000000000000e0"), "{}", rows[3]);
    assert!(rows[4].ends_with(",8.0000000000000004e-1"), "{}", rows[4]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("shock"));
}

#[test]
fn convergence_table() {
    let out = hughes(&[
        "convergence",
        "--config",
        s(&scenario("riemann_shock.toml")),
        "--levels",
        "25,50,100",
        "--window=-1.2,0.3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "J,dx,error_L1,observed_order");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].ends_with(','));
    let order: f64 = rows[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!(order > 0.8, "{order}");
}

#[test]
fn picard_symmetric_converges_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = hughes(&[
        "picard",
        "--config",
        s(&scenario("symmetric.toml")),
        "--cells",
        "20",
        "--iters",
        "5",
        "--tol",
        "1e-12",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1,0e0\n");
    assert!(dir.path().join("xi.csv").exists());
}

#[test]
fn bad_arguments_exit_with_one() {
    let out = hughes(&["simulate", "--config"]);
    assert_eq!(out.status.code(), Some(1));
}
