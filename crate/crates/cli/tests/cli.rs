//! End-to-end tests of the `pfp` binary: output shapes, reproducibility,
//! and the exit-code contract (0 ok / 2 parse / 3 budget / 4 invariant).

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pfp"))
}

fn channel(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "channels", name]
        .iter()
        .collect();
    p.display().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn region_constant_eve_is_flat() {
    let csv = stdout_of(&[
        "region",
        "--channel",
        &channel("constant_eve.json"),
        "--samples",
        "5",
    ]);
    let mut rows = 0;
    for line in csv.lines() {
        if line.starts_with('#') || line.starts_with("Rs,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let rmax: f64 = fields[1].parse().unwrap();
        assert!((rmax - 1.0).abs() < 1e-9, "row: {line}");
        rows += 1;
    }
    assert_eq!(rows, 5);
    assert!(csv.lines().any(|l| l.starts_with("Rs,Rmax,p_0,p_1")));
}

#[test]
fn region_copy_to_both_tracks_key_rate() {
    let csv = stdout_of(&[
        "region",
        "--channel",
        &channel("copy_to_both.json"),
        "--samples",
        "6",
    ]);
    for line in csv.lines() {
        if line.starts_with('#') || line.starts_with("Rs,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let rs: f64 = fields[0].parse().unwrap();
        let rmax: f64 = fields[1].parse().unwrap();
        assert!((rmax - rs.min(1.0)).abs() < 1e-6, "row: {line}");
    }
}

#[test]
fn region_tensor_power_per_use_rates() {
    // On the copy channel the two-copy region per use is still min(Rs, 1).
    let csv = stdout_of(&[
        "region",
        "--channel",
        &channel("copy_to_both.json"),
        "--samples",
        "3",
        "--n",
        "2",
    ]);
    for line in csv.lines() {
        if line.starts_with('#') || line.starts_with("Rs,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let rs: f64 = fields[0].parse().unwrap();
        let rmax: f64 = fields[1].parse().unwrap();
        assert!((rmax - rs.min(1.0)).abs() < 1e-6, "row: {line}");
        assert_eq!(fields.len(), 2 + 4, "joint distribution over 4 sequences");
    }
}

#[test]
fn region_json_carries_both_boundaries() {
    let out = stdout_of(&[
        "region",
        "--channel",
        &channel("bb84.json"),
        "--samples",
        "4",
        "--json",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(doc["boundary_raw"].as_array().unwrap().len() == 4);
    assert!(doc["boundary_envelope"].as_array().is_some());
    assert!(doc["corner_q"]["R"].as_f64().unwrap() > 0.5);
    assert!(doc["config"]["seed"].as_u64().is_some());
}

#[test]
fn simulate_runs_are_byte_identical() {
    let args = [
        "simulate",
        "--channel",
        &channel("copy_to_both.json"),
        "--n",
        "4",
        "--rate",
        "0.5",
        "--key-rate",
        "0.5",
        "--seed",
        "11",
    ];
    let a = stdout_of(&args);
    let b = stdout_of(&args);
    assert_eq!(a, b);
    let doc: serde_json::Value = serde_json::from_str(&a).unwrap();
    for key in ["spec", "avg_error", "oe_per_message", "security_distance", "seed"] {
        assert!(!doc[key].is_null(), "report key {key}");
    }
}

#[test]
fn simulate_noiseless_channel_reports_zeros() {
    let out = stdout_of(&[
        "simulate",
        "--channel",
        &channel("constant_eve.json"),
        "--n",
        "3",
        "--rate",
        "1.0",
        "--key-rate",
        "0.5",
        "--seed",
        "1",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    // Distinct codewords are not guaranteed, but the constant-Eve channel
    // always decouples Eve exactly.
    assert!(doc["security_distance"].as_f64().unwrap() < 1e-9);
}

#[test]
fn simulate_csv_trace() {
    let out = stdout_of(&[
        "simulate",
        "--channel",
        &channel("copy_to_both.json"),
        "--n",
        "3",
        "--rate",
        "1.0",
        "--format",
        "csv",
    ]);
    assert!(out.lines().any(|l| l == "kind,index,value"));
    assert!(out.lines().any(|l| l.starts_with("decode_error,0,")));
    assert!(out.lines().any(|l| l.starts_with("obfuscation_error,0,")));
}

#[test]
fn simulate_blocklength_sweep_emits_one_report_per_n() {
    let dir = std::env::temp_dir().join("pfp_sweep");
    std::fs::create_dir_all(&dir).unwrap();
    for n in [2usize, 3, 4] {
        let path = dir.join(format!("report_n{n}.json"));
        let out = run(&[
            "simulate",
            "--channel",
            &channel("copy_to_both.json"),
            "--n",
            &n.to_string(),
            "--rate",
            "0.5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let count = std::fs::read_dir(&dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("report_n")
        })
        .count();
    assert_eq!(count, 3);
}

#[test]
fn covering_constant_eve_fraction_zero() {
    let out = stdout_of(&[
        "covering",
        "--channel",
        &channel("constant_eve.json"),
        "--n",
        "4",
        "--key-rate",
        "1.0",
        "--trials",
        "20",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["report"]["fraction_exceeding"].as_f64().unwrap(), 0.0);
}

#[test]
fn typicality_orthogonal_pure_channel_has_zero_eps() {
    let out = stdout_of(&[
        "typicality",
        "--channel",
        &channel("copy_to_both.json"),
        "--n",
        "6",
        "--delta",
        "0.2",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(doc["eps_hat"].as_f64().unwrap() < 1e-12);
    assert!(doc["pass"].as_bool().unwrap());
    for key in ["n", "delta", "eps_hat", "alpha_hat", "beta_hat", "c_min", "pass"] {
        assert!(!doc[key].is_null(), "report key {key}");
    }
}

#[test]
fn ri_derive_known_conclusions() {
    let out = stdout_of(&["ri", "derive", "--channel", &channel("constant_eve.json")]);
    assert!(out.contains("conclusion: <N> >= 1[c->c]*"), "{out}");
    let out2 = stdout_of(&["ri", "derive", "--channel", &channel("copy_to_both.json")]);
    assert!(out2.contains("conclusion: <N> >= 0[c->c]*"), "{out2}");
    // Derivations replay identically.
    let again = stdout_of(&["ri", "derive", "--channel", &channel("constant_eve.json")]);
    assert_eq!(out, again);
}

#[test]
fn exit_codes() {
    // Missing file: parse/input error.
    let out = run(&["region", "--channel", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Malformed JSON: parse error.
    let dir = std::env::temp_dir();
    let bad = dir.join("pfp_bad_channel.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = run(&["region", "--channel", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Invariant violation (state with trace 0.9): exit 4.
    let invalid = dir.join("pfp_invalid_channel.json");
    std::fs::write(
        &invalid,
        r#"{"kind":"cq","dB":1,"dE":1,"symbols":[{"name":"x","state_BE":[[[0.9,0.0]]]}]}"#,
    )
    .unwrap();
    let out = run(&["region", "--channel", invalid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    // Budget exhaustion: exit 3.
    let out = run(&[
        "simulate",
        "--channel",
        &channel("copy_to_both.json"),
        "--n",
        "8",
        "--rate",
        "0.6",
        "--budget-mb",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn output_file_matches_stdout() {
    let dir = std::env::temp_dir();
    let path = dir.join("pfp_region_out.csv");
    let args = [
        "region",
        "--channel",
        &channel("constant_eve.json"),
        "--samples",
        "3",
    ];
    let stdout = stdout_of(&args);
    let out = run(&[
        "region",
        "--channel",
        &channel("constant_eve.json"),
        "--samples",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let from_file = std::fs::read_to_string(&path).unwrap();
    assert_eq!(stdout, from_file);
}
