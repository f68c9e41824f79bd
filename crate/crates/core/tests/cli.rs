use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qho-context")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn noiseless_sweep_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qho(&["sweep", "--l", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("sweep_l0.json"));
    assert!((s["max"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    assert!((s["argmax"][0].as_f64().unwrap() + std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    assert!((s["argmax"][1].as_f64().unwrap() + 3.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    assert_eq!(s["bound_classical"].as_f64(), Some(2.0));
    assert!(s["noise"].is_null());

    let csv = fs::read_to_string(dir.path().join("sweep_l0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("beta,eta,value"));
    assert_eq!(lines.count(), 81);
    assert!(fs::read_to_string(dir.path().join("sweep_l0.svg")).unwrap().contains("<svg"));
    assert!(!dir.path().join("sweep_l1.csv").exists());
}

#[test]
fn noisy_sweep_echoes_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(qho(&["sweep", "--l", "3", "--noise", "on", "--out", out]).status.code(), Some(0));
    let s = json(&dir.path().join("sweep_l3.json"));
    let max = s["max"].as_f64().unwrap();
    assert!(max > 2.0 && max < 2.0 * 2f64.sqrt());
    assert_eq!(s["noise"]["t2_star"].as_f64(), Some(0.8));
    assert_eq!(s["noise"]["gate_duration_pair"].as_f64(), Some(0.023));
}

#[test]
fn finer_grid_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qho(&["sweep", "--l", "1", "--grid", "-pi:pi:pi/8", "--via", "direct", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("sweep_l1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 17 * 17);
}

#[test]
fn config_errors_exit_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    for args in [
        vec!["sweep", "--grid", "1:1:0.1", "--out", out_s],
        vec!["sweep", "--l", "7", "--out", out_s],
        vec!["sweep", "--noise", "on", "--via", "direct", "--out", out_s],
        vec!["sweep", "--config", "/nonexistent/run.toml", "--out", out_s],
        vec!["state-independent", "--state", "file:/nonexistent.json", "--out", out_s],
        vec!["grape", "--target", "cQ", "--out", out_s],
        vec!["frobnicate"],
    ] {
        let o = qho(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{args:?} created output");
    }
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("res");
    fs::write(
        &cfg,
        format!(
            "via = \"direct\"\nout = {:?}\n[grid]\nstart = \"-pi/2\"\nstop = \"pi/2\"\nstep = \"pi/4\"\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    assert_eq!(qho(&["sweep", "--l", "2", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let s = json(&out.join("sweep_l2.json"));
    assert_eq!(s["via"], "direct");
    assert_eq!(s["n_points"], 25);
}

#[test]
fn state_independent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(qho(&["state-independent", "--out", out]).status.code(), Some(0));
    let r = json(&dir.path().join("state_independent.json"));
    assert!((r["total"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert_eq!(r["classical_bound"].as_f64(), Some(4.0));
    assert_eq!(r["quantum_bound"].as_f64(), Some(6.0));
    let terms = r["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 6);
    for t in &terms[..5] {
        assert!((t["expectation"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
    assert!((terms[5]["expectation"].as_f64().unwrap() + 1.0).abs() < 1e-9);
    assert_eq!(terms[5]["sign"].as_f64(), Some(-1.0));

    assert_eq!(qho(&["state-independent", "--noise", "on", "--out", out]).status.code(), Some(0));
    let total = json(&dir.path().join("state_independent.json"))["total"].as_f64().unwrap();
    assert!(total > 4.0 && total < 6.0);
}

#[test]
fn state_from_file_and_ket() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("rho.json");
    fs::write(
        &state,
        r#"{"re": [[0.4,0,0,0],[0,0.3,0,0],[0,0,0.2,0],[0,0,0,0.1]], "im": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#,
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    let arg = format!("file:{}", state.display());
    assert_eq!(qho(&["state-independent", "--state", &arg, "--out", out]).status.code(), Some(0));
    assert!((json(&dir.path().join("state_independent.json"))["total"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert_eq!(qho(&["state-independent", "--state", "ket:2", "--via", "direct", "--out", out]).status.code(), Some(0));

    fs::write(&state, r#"{"re": [[2,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#).unwrap();
    assert_eq!(qho(&["state-independent", "--state", &arg, "--out", out]).status.code(), Some(2));
}

#[test]
fn bounds_are_deterministic() {
    let a = qho(&["bounds"]);
    let b = qho(&["bounds"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("assignments enumerated: 16"));
    assert!(text.contains("classical range: [-2, 2]"));
    assert!(text.contains("classical range: [-4, 4]"));
    let j: Value = serde_json::from_slice(&qho(&["bounds", "--json"]).stdout).unwrap();
    assert_eq!(j[1]["classical_max"], 4);
    assert_eq!(j[1]["enumerated"], 512);
}

#[test]
fn grape_identity_converges_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qho(&["grape", "--target", "identity", "--hamiltonian", "free", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&dir.path().join("grape_identity.json"));
    assert_eq!(r["iterations"], 0);
    assert_eq!(r["status"], "converged");
    assert!((r["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("grape_identity.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("segment,channel,amplitude,phase"));
    assert_eq!(csv.lines().count(), 1 + 400 * 3);
}

#[test]
fn grape_budget_exhaustion_exits_3_with_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qho(&["grape", "--target", "cA", "--max-iterations", "2", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    let r = json(&dir.path().join("grape_cA.json"));
    assert_eq!(r["status"], "budget_exhausted");
    assert_eq!(r["goal_met"], false);
    assert_eq!(r["history"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("grape_cA.csv").exists());
}

#[test]
fn grape_custom_target_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("t.json");
    let mut re = vec![vec![0.0; 8]; 8];
    for (k, row) in re.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    fs::write(&target, serde_json::json!({ "re": re }).to_string()).unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qho(&["grape", "--target-file", target.to_str().unwrap(), "--hamiltonian", "free", "--max-iterations", "50", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("grape_custom.json").exists());

    fs::write(&target, serde_json::json!({ "re": [[1.0, 0.0], [0.0, 1.0]] }).to_string()).unwrap();
    let o = qho(&["grape", "--target-file", target.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_outputs_repeat_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = qho(&["sweep", "--noise", "on", "--grid", "-pi:pi:pi/6", "--seed", "5", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for l in 0..4 {
        for ext in ["csv", "json", "svg"] {
            let name = format!("sweep_l{l}.{ext}");
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name}");
        }
    }
}
