use std::fs;
use std::process::Command;

fn gk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gk"))
}

#[test]
fn wave_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.ini");
    fs::write(&cfg, "[wave]\ndeltas = 0,0.1\n").unwrap();
    let out = dir.path().join("out");
    let status = gk()
        .args(["wave", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let profile = fs::read_to_string(out.join("wave_profile.csv")).unwrap();
    assert!(profile.starts_with("z,U\n"));
    assert!(out.join("wave_profile_1.csv").exists());
    let speeds = fs::read_to_string(out.join("wave_speeds.csv")).unwrap();
    assert_eq!(speeds.lines().count(), 3);
}

#[test]
fn simulate_respects_runs_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.ini");
    fs::write(&cfg, "[lattice]\nd = 1\nn = 16\n[dynamics]\nk = 2\n").unwrap();
    let out = dir.path().join("out");
    let status = gk()
        .args([
            "simulate", "--runs", "3", "--t-grid", "0,0.001", "--seed", "4", "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let pairings = fs::read_to_string(out.join("pairings.csv")).unwrap();
    // 3 runs x 2 times x 7 test functions.
    assert_eq!(pairings.lines().count(), 1 + 3 * 2 * 7);
    let means = fs::read_to_string(out.join("site_means.csv")).unwrap();
    assert_eq!(means.lines().count(), 1 + 2 * 16);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, "[lattice]\nsides = 4\n").unwrap();
    let out = gk().args(["hydro", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sides"));

    let missing = gk()
        .args(["verify", "--config", "/nonexistent/gk.ini"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let thread = gk()
        .args(["wave", "--out"])
        .arg(dir.path())
        .env("GK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(thread.status.code(), Some(2));
}
