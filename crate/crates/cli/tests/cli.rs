//! End-to-end tests of the `vlaskit` binary: every subcommand, the exit-code
//! contract, and the on-disk output formats.

use std::path::Path;
use std::process::{Command, Output};

use vlaskit_core::sim::snapshot;

fn vlaskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlaskit"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be UTF-8")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn derive_prints_the_limiting_equation() {
    let out = vlaskit(&["derive", "--model", "contact"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("model: contact"), "missing header in:\n{text}");
    assert!(
        text.contains("d/dt rho = -m*rho + lambda*conv(a,rho)"),
        "missing equation in:\n{text}"
    );
    // The machine-readable form follows and parses back.
    let json_start = text.find('{').expect("JSON body expected");
    let model: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert_eq!(model["params"]["lambda"], 0.5);
}

#[test]
fn derive_writes_model_json_to_the_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("model.json");
    let out = vlaskit(&["derive", "--model", "bdlp", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let body = std::fs::read_to_string(&out_path).unwrap();
    let model: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(model["params"]["m"], 0.3);
    assert!(model["kernels"]["aplus"].is_object(), "kernels missing: {body}");
}

#[test]
fn derive_catalog_check_passes_for_every_preset() {
    let out = vlaskit(&["derive", "--catalog"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("ok      ").count(), 13, "unexpected listing:\n{text}");
    assert!(!text.contains("FAIL"), "catalog mismatch:\n{text}");
}

#[test]
fn derive_accepts_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "drift.gen",
        "const m = 2.0;\nconst sigma = 6.0;\ndeath = m;\nbirth = 1 scale inveps * sigma;\n",
    );
    let cfg = write(dir.path(), "run.cfg", &format!("model_file = {model}\n"));
    let out = vlaskit(&["derive", "--config", &cfg]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("d/dt rho = -m*rho + sigma"), "got:\n{}", stdout(&out));
}

#[test]
fn unknown_model_is_a_usage_error() {
    let out = vlaskit(&["derive", "--model", "no_such_model"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("unknown preset"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "model = contact\nrepicas = 10\n");
    let out = vlaskit(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown configuration key"), "stderr: {}", stderr(&out));
}

#[test]
fn simulate_emits_deterministic_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "model = bdlp\neps = 0.5\ntimes = 0.25,0.5\nreplicas = 4\nseed = 11\n",
    );
    let a = vlaskit(&["simulate", "--config", &cfg]);
    let b = vlaskit(&["simulate", "--config", &cfg]);
    assert!(a.status.success(), "stderr: {}", stderr(&a));
    assert_eq!(a.stdout, b.stdout, "same seed must reproduce the same snapshot stream");
    let records = snapshot::read_jsonl(a.stdout.as_slice()).unwrap();
    // 4 replicas × 2 snapshot times.
    assert_eq!(records.len(), 8);
    assert!(records.iter().all(|r| r.t == 0.25 || r.t == 0.5));
    assert!(stderr(&a).contains("4 replicas"), "stderr: {}", stderr(&a));
}

#[test]
fn simulate_binary_round_trips_through_the_reader() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "model = contact\neps = 0.5\ntimes = 0.5\nreplicas = 3\nseed = 21\n",
    );
    let jsonl = vlaskit(&["simulate", "--config", &cfg]);
    assert!(jsonl.status.success());
    let want = snapshot::read_jsonl(jsonl.stdout.as_slice()).unwrap();

    let bin_path = dir.path().join("snap.bin");
    let bin = vlaskit(&[
        "simulate",
        "--config",
        &cfg,
        "--binary",
        "--out",
        bin_path.to_str().unwrap(),
    ]);
    assert!(bin.status.success(), "stderr: {}", stderr(&bin));
    let bytes = std::fs::read(&bin_path).unwrap();
    let got = snapshot::read_binary(bytes.as_slice()).unwrap();
    assert_eq!(got, want, "binary and JSON lines must describe the same ensemble");
}

#[test]
fn simulate_rejects_an_eps_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "model = contact\neps = 1,0.5\n");
    let out = vlaskit(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("single scale"), "stderr: {}", stderr(&out));
}

#[test]
fn solve_writes_csv_rows_and_a_json_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "model = contact\ntimes = 0.5\n");
    let csv_path = dir.path().join("density.csv");
    let out = vlaskit(&["solve", "--config", &cfg, "--out", csv_path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,rho"));
    // Default grid is 64 cells; one snapshot time.
    assert_eq!(csv.lines().count(), 1 + 64);
    // Constant initial data stays spatially constant and follows
    // d/dt rho = (lambda<a> - m) rho = -0.5 rho.
    let first = lines.next().unwrap();
    let rho: f64 = first.rsplit(',').next().unwrap().parse().unwrap();
    assert!(
        (rho - (-0.25_f64).exp()).abs() < 1e-6,
        "rho(0.5) = {rho}, expected e^-0.25"
    );

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(csv_path.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["model"], "contact");
    assert_eq!(sidecar["equation"], "-m*rho + lambda*conv(a,rho)");
    assert_eq!(sidecar["steps"], 500);
}

#[test]
fn converge_tabulates_one_row_per_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "model = surgailis\neps = 1,0.5\ntimes = 0.5\nreplicas = 20\ngrid = 16\nseed = 3\n",
    );
    let csv_path = dir.path().join("sweep.csv");
    let out = vlaskit(&["converge", "--config", &cfg, "--out", csv_path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "eps,l2_k1,l2_err,sup_g2m1,g2_err,replicas");
    assert_eq!(lines.len(), 3, "one data row per eps:\n{csv}");
    assert!(lines[1].starts_with("1,"));
    assert!(lines[2].starts_with("0.5,"));

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(csv_path.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn numerical_blowup_exits_three() {
    // Supercritical branching: the kinetic equation grows like e^{5t} and
    // trips the solver's blow-up guard well before t = 5.
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "super.gen",
        "const lambda = 5.0;\nconst m = 0.01;\nkernel a tophat(0.5) scale eps;\n\
         death = m;\nbirth = 1 scale inveps * lambda * sum[p in gamma] a(x-p);\n",
    );
    let cfg = write(dir.path(), "run.cfg", &format!("model_file = {model}\ntimes = 5\n"));
    let out = vlaskit(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn selftest_reports_every_check() {
    let out = vlaskit(&["selftest"]);
    assert!(out.status.success(), "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("ok      ").count(), 6, "unexpected listing:\n{text}");
    assert!(text.contains("all checks passed"));
}
