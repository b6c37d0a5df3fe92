use std::path::Path;
use std::process::Command;

use jumplab::{cmd_simulate, ExperimentConfig, RunConfig};
use jumplab_core::{presets, ModelFile};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jumplab"))
}

fn write_config(dir: &Path, model: &jumplab_core::LindbladModel, run: RunConfig) -> std::path::PathBuf {
    let cfg = ExperimentConfig::new(ModelFile::from_model(model), run, "out");
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn generator(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v["generator"].clone()).unwrap()
}

#[test]
fn rates_thermal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &presets::thermal(1.0, 0.7, 10.0, 1.0), RunConfig::new(1.0, 1, 0));
    let st = bin().args(["rates", "-c"]).arg(&cfg).status().unwrap();
    assert!(st.success());
    let v = read_json(&dir.path().join("out/rates.json"));
    assert_eq!(v["schema_version"], 1);
    let m = generator(&v);
    assert!((m[0][1] - 0.3).abs() < 1e-12 && (m[1][0] - 0.7).abs() < 1e-12);
    let pi: Vec<f64> = serde_json::from_value(v["stationary"].clone()).unwrap();
    assert!((pi[0] - 0.7).abs() < 1e-12 && (pi[1] - 0.3).abs() < 1e-12);
    assert_eq!(v["mechanisms"]["pairs"][0]["mechanism"], "dissipative");
}

#[test]
fn rates_rabi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &presets::rabi(1.0, 10.0, 1.0), RunConfig::new(1.0, 1, 0));
    assert!(bin().args(["rates", "-c"]).arg(&cfg).status().unwrap().success());
    let m = generator(&read_json(&dir.path().join("out/rates.json")));
    assert_eq!(m, vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
}

#[test]
fn degenerate_spectrum_exits_2_with_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "model": {"dim": 2, "gamma": 1, "eta": 1, "nu": [[0.5, 0], [0.5, 0]]},
        "run": {"horizon": 1, "n_trajectories": 1}
    }"#;
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, text).unwrap();
    let out = bin().args(["rates", "-c"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "degenerate_spectrum");
}

#[test]
fn model_path_is_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let model = ModelFile::from_model(&presets::rabi(1.0, 10.0, 1.0));
    std::fs::write(dir.path().join("model.json"), serde_json::to_string(&model).unwrap()).unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"model": "model.json", "run": {"horizon": 1, "n_trajectories": 1}}"#).unwrap();
    assert!(bin().args(["rates", "-c"]).arg(&cfg).status().unwrap().success());
    assert!(dir.path().join("jumplab-out/rates.json").exists());
}

#[test]
fn missing_config_exits_1() {
    let out = bin().args(["rates", "-c", "/nonexistent/jumplab.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stability_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut run = RunConfig::new(1.0, 2, 0);
    run.dt = jumplab::AutoOr::Value(1e-2);
    let cfg = write_config(dir.path(), &presets::rabi(1.0, 10.0, 1.0), run);
    let out = bin().args(["simulate", "-c"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "stability_guard");
    assert_eq!(err["error"]["seed"], 0);
}

#[test]
fn zeno_needs_two_gammas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &presets::rabi(1.0, 1.0, 1.0), RunConfig::new(1.0, 1, 0));
    let out = bin().args(["zeno", "-c"]).arg(&cfg).args(["--gammas", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zeno_writes_one_row_per_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &presets::rabi(1.0, 1.0, 1.0), RunConfig::new(20.0, 4, 2));
    let st = bin().args(["zeno", "-c"]).arg(&cfg).args(["--gammas", "2,4"]).status().unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("gamma,dt,fixed_jumps"));
    assert!(lines[1].starts_with("2,") && lines[2].starts_with("4,"));
}

fn strip_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("generated_at");
    v
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &presets::rabi(1.0, 10.0, 1.0), RunConfig::new(2.0, 1, 42));
    let summary = dir.path().join("out/summary.json");
    assert!(bin().args(["simulate", "-c"]).arg(&cfg).status().unwrap().success());
    let first = std::fs::read_to_string(&summary).unwrap();
    assert!(bin().args(["simulate", "-c"]).arg(&cfg).status().unwrap().success());
    let second = std::fs::read_to_string(&summary).unwrap();
    let strip = |s: &str| s.lines().filter(|l| !l.contains("generated_at")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&first), strip(&second));
    assert!(dir.path().join("out/meanq.csv").exists());
    assert!(dir.path().join("out/config.json").exists());
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &presets::rabi(1.0, 10.0, 1.0), RunConfig::new(2.0, 6, 7));
    let summary = dir.path().join("out/summary.json");
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let st = bin().env("JUMPLAB_THREADS", threads).args(["simulate", "-c"]).arg(&cfg).status().unwrap();
        assert!(st.success());
        runs.push(strip_timestamp(read_json(&summary)));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn rates_json_matches_summary_block() {
    let dir = tempfile::tempdir().unwrap();
    let mut run = RunConfig::new(1.0, 2, 1);
    run.initial = Some(vec![0.0, 1.0]);
    let cfg = write_config(dir.path(), &presets::thermal(1.0, 0.7, 10.0, 1.0), run);
    assert!(bin().args(["simulate", "-c"]).arg(&cfg).status().unwrap().success());
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert!(bin().args(["rates", "-c"]).arg(&cfg).status().unwrap().success());
    let rates = read_json(&dir.path().join("out/rates.json"));
    assert_eq!(summary["analytic"], rates);
}

#[test]
fn simulate_rabi_recovers_unit_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut run = RunConfig::new(20.0, 500, 2024);
    run.dt = jumplab::AutoOr::Value(2e-4);
    let model = ModelFile::from_model(&presets::rabi(1.0, 10.0, 1.0));
    let cfg = ExperimentConfig::new(model, run, dir.path().join("out"));
    let s = cmd_simulate(&cfg).unwrap();
    let m = &s.jump_stats.as_ref().unwrap().m_hat;
    assert!((m[0][1] - 1.0).abs() <= 0.15, "m_hat = {m:?}");
    assert!((m[1][0] - 1.0).abs() <= 0.15, "m_hat = {m:?}");
    assert_eq!(s.n_failed, 0);
}

#[test]
fn simulate_with_qy_reports_phase_means() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(
        ModelFile::from_model(&presets::rabi(1.0, 10.0, 1.0)),
        RunConfig::new(4.0, 4, 5),
        dir.path().join("out"),
    );
    cfg.outputs.save_qy = true;
    cfg.outputs.save_trajectories = true;
    let s = cmd_simulate(&cfg).unwrap();
    let phases = s.phase_means.unwrap();
    assert_eq!(phases.len(), 2);
    let y = phases[0].table.as_ref().unwrap().entries[0].mean;
    // the conditional coherence sits on the positive imaginary axis
    assert!(y[1] > 0.3 && y[0].abs() < 0.1, "{y:?}");
    assert!(dir.path().join("out/trajectories/traj_00000.csv").exists());
    let qy = std::fs::read_to_string(dir.path().join("out/qy/qy_00003.csv")).unwrap();
    assert!(qy.starts_with("t,Q_0,Q_1,ReY_01,ImY_01"));
}
