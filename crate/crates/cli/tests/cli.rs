//! Exit-code and smoke behavior of the command-line interface.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_brownshift"))
}

fn tmp_out(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("brownshift-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("out dir");
    dir
}

#[test]
fn zero_replicates_is_a_config_error() {
    let out = bin()
        .args(["embed", "--n", "0"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_measure_spec_is_a_config_error() {
    let out = bin()
        .args(["embed", "--n", "5", "--nu", "atoms:notanumber"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_test_selection_is_a_config_error() {
    let out = bin()
        .args(["verify", "--n", "5", "--tests", "nonsense"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn injected_fault_fails_verification() {
    let dir = tmp_out("fault");
    let out = bin()
        .args([
            "verify", "--n", "30", "--dt", "1e-2", "--base-horizon", "8", "--seed", "2",
            "--inject-fault", "--tests", "balancing",
        ])
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(1), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn clean_verification_passes() {
    let dir = tmp_out("clean");
    let out = bin()
        .args([
            "verify", "--n", "30", "--dt", "1e-2", "--base-horizon", "8", "--seed", "2",
            "--tests", "balancing",
        ])
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn oracle_rejects_adversarial_assignment() {
    let dir = tmp_out("oracle");
    let out = bin()
        .args(["match-oracle", "--n", "50", "--seed", "3", "--adversarial"])
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tmp_out("env");
    let out = bin()
        .args(["embed", "--n", "4", "--dt", "1e-2", "--base-horizon", "4", "--max-horizon", "16"])
        .env("BROWNSHIFT_OUT", &dir)
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0));
    let wrote_jsonl = std::fs::read_dir(&dir)
        .expect("read dir")
        .any(|e| e.expect("entry").path().extension().map(|x| x == "jsonl").unwrap_or(false));
    assert!(wrote_jsonl, "no JSONL written under $BROWNSHIFT_OUT");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn embed_runs_every_construction() {
    let dir = tmp_out("constructions");
    for (construction, nu) in [
        ("bertoin_le_jan", "atoms:1=1"),
        ("inverse_local_time", "atoms:1=1"),
        ("atom_splitting", "atoms:0=0.5,2=0.5"),
        ("atom_probability", "atoms:1=1"),
        ("non_stopping", "atoms:1=1"),
        ("excursion_reflection", "atoms:1=1"),
    ] {
        let out = bin()
            .args([
                "embed", "--construction", construction, "--nu", nu, "--n", "4", "--dt", "1e-2",
                "--base-horizon", "8", "--max-horizon", "64", "--tests", "none",
            ])
            .args(["--out", dir.to_str().unwrap()])
            .output()
            .expect("spawn");
        assert_eq!(
            out.status.code(),
            Some(0),
            "{construction}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    std::fs::remove_dir_all(&dir).ok();
}
