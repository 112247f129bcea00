//! Batch determinism check; prints one `PASS`/`FAIL` line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn lvam(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_lvam")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Relative path -> contents of every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn cli_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (d1, d2) = (tmp.path().join("d1"), tmp.path().join("d2"));
    for d in [&d1, &d2] {
        lvam(&["phantom", "--out", &s(d), "--seed", "42", "--count", "4", "--noise", "0.03"]);
    }

    let mut outs = Vec::new();
    for (i, detector) in ["oracle", "oracle", "profile", "profile"].iter().enumerate() {
        let data = if i % 2 == 0 { &d1 } else { &d2 };
        let out = tmp.path().join(format!("out{i}"));
        lvam(&["run", &s(data), "--out", &s(&out), "--detector", detector, "--oracle-noise", "1.5", "--seed", "9"]);
        outs.push(snapshot(&out));
    }
    let bundles_equal = snapshot(&d1) == snapshot(&d2);
    let oracle_equal = outs[0] == outs[1];
    let profile_equal = outs[2] == outs[3];
    let complete = outs.iter().all(|o| {
        o.contains_key("report.json") && o.contains_key("report.csv") && o.contains_key("sdr.csv") && o.len() == 12
    });
    let ok = bundles_equal && oracle_equal && profile_equal && complete;
    println!(
        "{} cli_determinism: bundles identical = {bundles_equal}, oracle runs identical = {oracle_equal}, profile runs identical = {profile_equal}, {} files per run",
        if ok { "PASS" } else { "FAIL" },
        outs[0].len()
    );
    assert!(ok);
}
