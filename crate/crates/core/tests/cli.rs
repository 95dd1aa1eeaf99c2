//! End-to-end checks of the command line front end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortexflow"))
        .args(&args[..1])
        .arg("--config")
        .arg(config)
        .args(&args[1..])
        .output()
        .unwrap()
}

#[test]
fn validation_failure_is_one_line_and_names_the_field() {
    let dir = scratch("invalid");
    let config = dir.join("bad.toml");
    let out = dir.join("out");
    std::fs::write(&config, "[space]\nweights = [1]\ntau = -2.0\n").unwrap();
    let res = run(&["crit", "--out", out.to_str().unwrap()], &config);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error kind=invalid_parameter field=space.tau "), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = scratch("unknown");
    let config = dir.join("bad.toml");
    std::fs::write(&config, "[flow]\nstep = 0.1\n").unwrap();
    let res = run(&["flow", "--out", dir.join("out").to_str().unwrap()], &config);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8(res.stderr).unwrap().contains("field=flow.step"));
}

#[test]
fn runtime_failure_removes_partial_outputs() {
    let dir = scratch("rollback");
    let config = dir.join("empty_sector.toml");
    // the seed has nothing on the coordinate fixed by -1
    std::fs::write(&config, "[space]\nweights = [1, 2]\ntau = 0.75\n[crit]\nseed = [[1.0, 0.0], [0.0, 0.0]]\n")
        .unwrap();
    let out = dir.join("nested").join("out");
    let res = run(&["crit", "--out", out.to_str().unwrap()], &config);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.starts_with("error kind=empty_sector field=- "), "{stderr}");
    assert!(!dir.join("nested").exists());
}

#[test]
fn effective_config_reproduces_the_run() {
    let dir = scratch("echo");
    let config = dir.join("run.toml");
    std::fs::write(&config, "[space]\nweights = [1, 2]\ntau = 0.75\n[scan]\nsamples = 50\n").unwrap();
    let first = dir.join("first");
    assert!(run(&["scan", "--out", first.to_str().unwrap(), "--seed", "9"], &config).status.success());
    let echo = first.join("config.effective.toml");
    let text = std::fs::read_to_string(&echo).unwrap();
    assert!(text.contains("rng_seed = 9"));
    let second = dir.join("second");
    assert!(run(&["scan", "--out", second.to_str().unwrap()], &echo).status.success());
    assert_eq!(std::fs::read(first.join("scan.json")).unwrap(), std::fs::read(second.join("scan.json")).unwrap());
}

#[test]
fn seed_override_changes_sampling() {
    let dir = scratch("seed");
    let config = dir.join("run.toml");
    std::fs::write(&config, "[scan]\nsamples = 20\n").unwrap();
    let (a, b) = (dir.join("a"), dir.join("b"));
    assert!(run(&["scan", "--out", a.to_str().unwrap(), "--seed", "1"], &config).status.success());
    assert!(run(&["scan", "--out", b.to_str().unwrap(), "--seed", "2"], &config).status.success());
    assert_ne!(std::fs::read(a.join("scan.json")).unwrap(), std::fs::read(b.join("scan.json")).unwrap());
}

#[test]
fn index_and_webs_artifacts() {
    let dir = scratch("artifacts");
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        "[space]\nweights = [1, 2]\n[index]\nqueries = [{ class = 1, sectors = [\"2:1\"] }]\n\
         [webs]\nclasses = [2]\nends = [1]\n",
    )
    .unwrap();
    let out = dir.join("out");
    assert!(run(&["index", "--out", out.to_str().unwrap()], &config).status.success());
    let csv = std::fs::read_to_string(out.join("index.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "1 2,0,1,2:1,3,1/2,7");
    assert!(run(&["webs", "--out", out.to_str().unwrap()], &config).status.success());
    let webs = std::fs::read_to_string(out.join("webs_B2_k1_g0.txt")).unwrap();
    assert_eq!(webs.lines().count(), 4);
    assert!(std::fs::read_to_string(out.join("webs_B2_k1_g0_hasse.dot")).unwrap().starts_with("digraph"));
}
