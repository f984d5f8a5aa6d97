//! End-to-end checks against the compiled binary: exit codes, output
//! layout, determinism, and run/analyze report agreement.

use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_mvsim");

fn mvsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_hashes(dir: &Path) -> Vec<(String, String)> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let h = format!("{:x}", Sha256::digest(std::fs::read(dir.join(&n)).unwrap()));
            (n, h)
        })
        .collect()
}

#[test]
fn scenarios_lists_bundled_names() {
    let out = mvsim(&["scenarios"]);
    assert!(out.status.success());
    let listing = stdout(&out);
    let names: Vec<&str> = listing.lines().collect();
    assert_eq!(names, [
        "vircadia_2user",
        "hubs_seminar_8user",
        "vrchat_4user",
        "rr_campus",
        "local_vs_remote",
    ]);
}

#[test]
fn run_bundled_scenario_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mvsim(&["run", "vircadia_2user", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for f in ["user1_ul.csv", "user1_dl.csv", "user2_ul.csv", "user2_dl.csv", "server.csv"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["scenario"], "vircadia_2user");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 42);
    assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);
    assert!(!manifest["assumptions"].as_array().unwrap().is_empty());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();

    // missing mandatory seed
    let no_seed = dir.path().join("no_seed.toml");
    std::fs::write(&no_seed, concat!(
        "schema_version = 1\nscenario = \"x\"\nduration_s = 1.0\n",
        "[workload]\nplatform = \"local_vs_remote\"\nusers = []\n",
    ))
    .unwrap();
    let out = mvsim(&["run", no_seed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // malformed TOML
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "this is not toml [").unwrap();
    let out = mvsim(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exits_4() {
    let out = mvsim(&["run", "/nonexistent/path/also_not_a_scenario.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = mvsim(&["run", "rr_campus", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(csv_hashes(d1.path()), csv_hashes(d2.path()));
}

#[test]
fn analyze_matches_run_embedded_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mvsim(&["run", "vircadia_2user", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());

    let mut csvs: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().path().to_str().unwrap().to_string())
        .filter(|p| p.ends_with(".csv") && !p.contains("plots"))
        .collect();
    csvs.sort();
    let args: Vec<&str> = std::iter::once("analyze").chain(csvs.iter().map(|s| s.as_str())).collect();
    let out = mvsim(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let standalone: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let embedded: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(standalone["traces"], embedded["traces"]);
}

#[test]
fn analyze_handles_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "t_us,size_bytes,dir,transport,flow,src,dst\n").unwrap();
    let out = mvsim(&["analyze", empty.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let t = &report["traces"]["empty"];
    assert_eq!(t["n_packets"], 0);
    assert_eq!(t["total_bytes"], 0);
}
