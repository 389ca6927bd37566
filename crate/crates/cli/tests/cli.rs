use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn expected() -> Value {
    serde_json::from_str(&fs::read_to_string(fixture("expected.json")).unwrap()).unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dichotomy")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn divergence_human_and_json() {
    let input = fixture("zero_vs_mixed.json");
    let out = run(&["divergence", "--kind", "relent", "--input", path(&input)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1.000000\n");

    let out = run(&["divergence", "--kind", "dh", "--eps", "0.5", "--input", path(&input), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "dh");
    assert_eq!(v["params"]["eps"], 0.5);
    // Accepting ρ with probability 1/2 costs σ-weight 1/4.
    assert!((v["bits"].as_f64().unwrap() - 2.0).abs() < 1e-8);

    let e = expected();
    let out = run(&["divergence", "--kind", "relent", "--input", path(&fixture("benchmark_src.json")), "--json"]);
    let got = stdout_json(&out)["bits"].as_f64().unwrap();
    assert!((got - e["benchmark_src_relent"].as_f64().unwrap()).abs() < 1e-8);
}

#[test]
fn divergence_values_have_nine_significant_digits() {
    let out = run(&["divergence", "--kind", "sandwiched", "--alpha", "2", "--input", path(&fixture("full_rank.json")), "--json"]);
    let bits = stdout_json(&out)["bits"].as_f64().unwrap();
    assert_eq!(bits, format!("{bits:.8e}").parse::<f64>().unwrap());
}

#[test]
fn divergence_exit_codes() {
    let unbounded = fixture("mixed_vs_zero.json");
    let out = run(&["divergence", "--kind", "dmax", "--input", path(&unbounded)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "inf\n");
    let out = run(&["divergence", "--kind", "dmax", "--input", path(&unbounded), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["bits"], "inf");

    let full = fixture("full_rank.json");
    assert_eq!(run(&["divergence", "--kind", "petz", "--alpha", "1", "--input", path(&full)]).status.code(), Some(2));
    assert_eq!(run(&["divergence", "--kind", "dh", "--input", path(&full)]).status.code(), Some(2));
    assert_eq!(run(&["divergence", "--kind", "relent", "--input", path(&fixture("plus.json"))]).status.code(), Some(2));
    assert_eq!(run(&["divergence", "--kind", "relent", "--input", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn synthesize_exact_writes_channel_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("channel.json");
    let out = run(&[
        "synthesize",
        "--mode",
        "exact",
        "--src",
        path(&fixture("zero_vs_mixed.json")),
        "--dst",
        path(&fixture("benchmark_dst.json")),
        "--out",
        path(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = stdout_json(&out);
    assert!(rep["sigma_error"].as_f64().unwrap() <= 1e-9);
    assert!(rep["rho_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(rep["borderline"], false);

    let ch: dichotomy::io::ChannelJson = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(ch.to_channel().is_ok());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("channel.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "synthesize");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn synthesize_refusals() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.json");
    let out = run(&[
        "synthesize",
        "--mode",
        "approx",
        "--eps1",
        "0.05",
        "--eps2",
        "0.05",
        "--src",
        path(&fixture("full_rank.json")),
        "--dst",
        path(&fixture("steep_dst.json")),
        "--out",
        path(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("D_h") && msg.contains("D_max"), "{msg}");
    assert!(!out_path.exists());

    let out = run(&[
        "synthesize",
        "--mode",
        "approx",
        "--src",
        path(&fixture("full_rank.json")),
        "--dst",
        path(&fixture("benchmark_dst.json")),
        "--out",
        path(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synthesize_approx_meets_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.json");
    for metric in ["trace", "purified"] {
        let out = run(&[
            "synthesize",
            "--mode",
            "approx",
            "--eps1",
            "0.2",
            "--eps2",
            "0.1",
            "--metric",
            metric,
            "--src",
            path(&fixture("zero_vs_mixed.json")),
            "--dst",
            path(&fixture("plus_vs_mixed.json")),
            "--out",
            path(&out_path),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let rep = stdout_json(&out);
        assert!(rep["sigma_error"].as_f64().unwrap() <= 1e-8);
        assert!(rep["rho_error"].as_f64().unwrap() <= rep["certified_bound"].as_f64().unwrap() + 1e-8);
    }
}

#[test]
fn sweep_rate_curve_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out_path = dir.path().join(name);
        let out = run(&[
            "sweep",
            "--src",
            path(&fixture("benchmark_src.json")),
            "--dst",
            path(&fixture("benchmark_dst.json")),
            "--eps",
            "0.1",
            "--n-max",
            "64",
            "--classical",
            "--out",
            path(&out_path),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        bytes.push(fs::read(&out_path).unwrap());
        assert!(dir.path().join(format!("{name}.manifest.json")).exists());
    }
    assert_eq!(bytes[0], bytes[1]);
    let text = String::from_utf8(bytes.pop().unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,m,rate,eps1,eps2,achieved_error,certified,dh_bits,dmax_bits");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.first().unwrap()[0], "1");
    assert_eq!(rows.last().unwrap()[0], "64");
    for r in &rows {
        assert_eq!(r.len(), 9);
        let rate: f64 = r[2].parse().unwrap();
        assert!((0.0..2.82).contains(&rate));
    }
}

#[test]
fn sweep_at_fixed_rate_writes_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("s.csv");
    let out = run(&[
        "sweep",
        "--src",
        path(&fixture("benchmark_src.json")),
        "--dst",
        path(&fixture("benchmark_dst.json")),
        "--eps",
        "0.1",
        "--rate",
        "2.0",
        "--n-min",
        "200",
        "--n-max",
        "2000",
        "--samples",
        "10",
        "--classical",
        "--out",
        path(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.csv.fit.json")).unwrap()).unwrap();
    assert_eq!(fit, stdout_json(&out));
    assert_eq!(fit["regime"], "ErrorDecay");
    assert!(fit["slope_bits_per_n"].as_f64().unwrap() < 0.0);
    assert!(fit["r_squared"].as_f64().unwrap() >= 0.9);
    let csv = fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn sweep_near_critical_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--src",
        path(&fixture("benchmark_src.json")),
        "--dst",
        path(&fixture("benchmark_dst.json")),
        "--eps",
        "0.1",
        "--rate",
        "2.8",
        "--n-max",
        "100",
        "--classical",
        "--out",
        path(&dir.path().join("s.csv")),
    ]);
    assert_eq!(out.status.code(), Some(5));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("lambda1") && msg.contains("lambda2"), "{msg}");
}

#[test]
fn resource_athermality() {
    let e = expected();
    let out = run(&[
        "resource",
        "athermality",
        "--rho1",
        path(&fixture("excited.json")),
        "--rho2",
        path(&fixture("ground.json")),
        "--hamiltonian",
        path(&fixture("hamiltonian.json")),
        "--beta",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "AsymptoticallyFeasible");
    let f1 = v["free_energy1"].as_f64().unwrap();
    assert!((f1 - e["excited_free_energy_beta1"].as_f64().unwrap()).abs() < 1e-8);
    assert!(v["free_energy2"].as_f64().unwrap().abs() < 1e-8);

    let out = run(&[
        "resource",
        "athermality",
        "--rho1",
        path(&fixture("gibbs_beta1.json")),
        "--rho2",
        path(&fixture("excited.json")),
        "--hamiltonian",
        path(&fixture("hamiltonian.json")),
        "--beta",
        "1",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "StrongConverseRegime");
    let f = v["free_energy1"].as_f64().unwrap();
    assert!((f - e["gibbs_beta1_free_energy"].as_f64().unwrap()).abs() < 1e-8);

    let out = run(&[
        "resource",
        "athermality",
        "--rho1",
        path(&fixture("excited.json")),
        "--rho2",
        path(&fixture("ground.json")),
        "--hamiltonian",
        path(&fixture("hamiltonian.json")),
        "--beta",
        "-1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_coherence() {
    let out = run(&["resource", "coherence", "--rho", path(&fixture("plus.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["rate"].as_f64().unwrap() - expected()["plus_coherence"].as_f64().unwrap()).abs() < 1e-9);

    let out = run(&["resource", "coherence", "--rho", path(&fixture("plus.json")), "--sigma", path(&fixture("mixed.json"))]);
    assert_eq!(stdout_json(&out)["dio_transformation_rate"], "unbounded");
    let out = run(&["resource", "coherence", "--rho", path(&fixture("mixed.json")), "--sigma", path(&fixture("plus.json"))]);
    assert_eq!(stdout_json(&out)["dio_transformation_rate"], 0.0);
}
