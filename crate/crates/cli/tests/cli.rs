//! End-to-end tests driving the `droplet` binary.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

fn droplet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_droplet"))
}

/// Map of relative path → file bytes for every file under `dir`.
fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn verify_all_quick_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let status = droplet()
            .args(["verify-all", "--quick", "--seed", "7"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "verify-all --quick failed");
    }
    let a = tree_bytes(&out_a);
    let b = tree_bytes(&out_b);
    assert!(!a.is_empty(), "no artifacts written");
    assert_eq!(a, b, "repeated runs produced different artifact trees");
}

#[test]
fn unknown_flag_exits_one_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = droplet()
        .args(["matrix", "--definitely-not-a-flag"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(!out.exists(), "artifacts written despite parse failure");
}

#[test]
fn subcommands_write_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_path_buf();
    let runs: [(&[&str], &[&str]); 4] = [
        (
            &["calogero", "--n", "3", "--samples", "5"],
            &["calogero.jsonl", "calogero_trajectory.csv"],
        ),
        (
            &["fock", "--op", "i2", "--level", "4", "--n", "10"],
            &["fock.jsonl", "fock_spectrum.csv"],
        ),
        (
            &["jack", "--degree", "3", "--n", "6"],
            &["jack.jsonl", "jack_eigen.csv"],
        ),
        (
            &["langevin", "--kind", "matrix", "--n", "3", "--count", "100"],
            &["langevin.jsonl"],
        ),
    ];
    for (args, files) in runs {
        let status = droplet()
            .args(args)
            .args(["--seed", "5"])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "{args:?} failed");
        for f in files {
            assert!(out.join(f).is_file(), "{f} missing after {args:?}");
        }
    }
    // Level-4 spectrum: five partitions of 4, header plus five rows.
    let spectrum = std::fs::read_to_string(out.join("fock_spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 6);
}

#[test]
fn invalid_config_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "omega = not-a-number\n").unwrap();
    let status = droplet()
        .args(["matrix", "--n", "3"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
