use std::f64::consts::LN_2;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn infoloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infoloop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&o.stdout)
        )
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn analyze_unstable_plant_with_deadbeat_controller() {
    let path = config("unstable_deadbeat.json");
    let o = infoloop(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    let r = &v["report"];
    let want = LN_2 + 0.5 * LN_2;
    assert!((num(&r["total_rate"]) - want).abs() < 1e-10);
    assert!((num(&r["control_term"]) - LN_2).abs() < 1e-10);
    assert!((num(&r["disturbance_term"]) - 0.5 * LN_2).abs() < 1e-10);
    assert!((num(&r["bode_analytic"]) - LN_2).abs() < 1e-10);
    assert!(num(&r["residual"]).abs() < 1e-8);
    assert_eq!(r["log_base"], "nats");
    assert_eq!(v["stability"]["stabilizing"], true);
    assert_eq!(v["plant_poles"][0][0], 2.0);
}

#[test]
fn analyze_in_bits() {
    let path = config("unstable_deadbeat.json");
    let o = infoloop(&["--bits", "analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = &stdout_json(&o)["report"];
    assert_eq!(r["log_base"], "bits");
    assert!((num(&r["total_rate"]) - 1.5).abs() < 1e-10);
}

#[test]
fn numbers_carry_twelve_significant_digits() {
    let path = config("unstable_deadbeat.json");
    let o = infoloop(&["analyze", path.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("\"total_rate\": 1.03972077084"), "{text}");
}

#[test]
fn analyze_unstabilized_loop_exits_two_naming_the_pole() {
    let path = config("unstabilized.json");
    let o = infoloop(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("offending closed-loop poles: 2"), "{err}");
    let v = stdout_json(&o);
    assert_eq!(v["stability"]["offending_poles"][0][0], 2.0);
}

#[test]
fn malformed_config_exits_one_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{
  "plant": {"num": [0, "one"], "den": [1, -2]},
  "controller": {"num": [-2], "den": [1]},
  "channel_noise": {"kind": "white", "variance": 1},
  "output_disturbance": {"kind": "white", "variance": 1}
}"#,
    )
    .unwrap();
    let o = infoloop(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("plant.num[1]"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unknown_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.json");
    let text = std::fs::read_to_string(config("open_loop.json"))
        .unwrap()
        .replacen('{', "{\"gain_margin\": 3,", 1);
    std::fs::write(&path, text).unwrap();
    let o = infoloop(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gain_margin"));
}

#[test]
fn missing_config_exits_one() {
    let o = infoloop(&["analyze", "/nonexistent/loop.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn integrands_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("integrands.csv");
    let path = config("unstable_deadbeat.json");
    let o = infoloop(&[
        "--grid",
        "256",
        "analyze",
        path.to_str().unwrap(),
        "--integrands",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("omega,log_Syw,log_Fwy,disturbance_integrand")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 256);
    let mean = |c: usize| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
    assert!((mean(1) - 1.5 * LN_2).abs() < 1e-9);
    assert!((mean(2) - LN_2).abs() < 1e-9);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let path = config("open_loop.json");
    let o = infoloop(&[
        "--output",
        out.to_str().unwrap(),
        "analyze",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!((num(&v["report"]["total_rate"]) - 0.5 * LN_2).abs() < 1e-10);
}

#[test]
fn verify_random_suite() {
    let o = infoloop(&["verify", "--random", "25"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["random"]["cases"], 25);
    assert_eq!(v["random"]["passed"], 25);
    assert_eq!(v["pass"], true);
}

#[test]
fn verify_empty_suite() {
    let o = infoloop(&["verify", "--random", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["random"]["cases"], 0);
    assert!(stderr(&o).contains("0 cases"));
}

#[test]
fn verify_independence_across_controllers() {
    let path = config("colored_independence.json");
    let o = infoloop(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    let terms = v["independence"]["disturbance_terms"].as_array().unwrap();
    assert_eq!(terms.len(), 3);
    let first = num(&terms[0]);
    assert!(first > 0.0);
    for t in terms {
        assert!((num(t) - first).abs() < 1e-9);
    }
    assert_eq!(v["independence"]["pass"], true);
    assert_eq!(v["config"]["pass"], true);
}

#[test]
fn verify_without_inputs_is_usage_error() {
    assert_eq!(infoloop(&["verify"]).status.code(), Some(1));
}

#[test]
fn simulate_reference_loop_passes() {
    let path = config("unstable_deadbeat.json");
    let o = infoloop(&["simulate", path.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["seed"], 1);
    assert!(num(&v["abs_gap"]) <= 0.03);
    assert!((num(&v["analytic_rate"]) - 1.5 * LN_2).abs() < 1e-10);
}

#[test]
fn simulate_degenerate_tolerance_fails() {
    let path = config("open_loop.json");
    let o = infoloop(&["simulate", path.to_str().unwrap(), "--tolerance", "1e-12"]);
    assert_eq!(o.status.code(), Some(3));
    let v = stdout_json(&o);
    assert_eq!(v["pass"], false);
    assert!(num(&v["abs_gap"]) > 0.0);
    assert!(stderr(&o).contains("gap"));
}

#[test]
fn simulate_non_stabilizing_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diverge.json");
    // closed-loop pole at 1.5
    let text = std::fs::read_to_string(config("unstable_deadbeat.json"))
        .unwrap()
        .replace("\"num\": [-2]", "\"num\": [-0.5]");
    std::fs::write(&path, text).unwrap();
    let o = infoloop(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let path = config("open_loop.json");
    let o = infoloop(&[
        "simulate",
        path.to_str().unwrap(),
        "--trajectory",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,w,v,z,y,u"));
    for line in lines.take(1000) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[4], f[3] + f[1]);
    }
}

fn sweep(param: &str, values: &str, cfg: &str) -> (Option<i32>, Vec<Vec<f64>>, String) {
    let path = config(cfg);
    let o = infoloop(&[
        "sweep",
        path.to_str().unwrap(),
        "--param",
        param,
        "--values",
        values,
    ]);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (o.status.code(), rows, header)
}

#[test]
fn sweep_disturbance_variance() {
    let (code, rows, header) = sweep("sigma_v2", "0,1,3", "unstable_deadbeat.json");
    assert_eq!(code, Some(0));
    assert_eq!(header, "value,total,control,disturbance");
    let want = [0.0, 0.5 * LN_2, LN_2];
    for (row, w) in rows.iter().zip(want) {
        assert!((row[3] - w).abs() < 1e-10, "{row:?}");
        assert!((row[2] - LN_2).abs() < 1e-10);
    }
    assert_eq!(rows.len(), 3);
}

#[test]
fn sweep_channel_variance() {
    let (code, rows, _) = sweep("sigma_w2", "1,2", "unstable_deadbeat.json");
    assert_eq!(code, Some(0));
    assert!((rows[0][3] - 0.5 * LN_2).abs() < 1e-10);
    assert!((rows[1][3] - 0.5 * 1.5f64.ln()).abs() < 1e-10);
}

#[test]
fn sweep_empty_list_is_header_only() {
    let (code, rows, header) = sweep("sigma_v2", "", "unstable_deadbeat.json");
    assert_eq!(code, Some(0));
    assert_eq!(header, "value,total,control,disturbance");
    assert!(rows.is_empty());
}

#[test]
fn sweep_unknown_parameter_exits_one() {
    let (code, _, _) = sweep("gain", "1", "unstable_deadbeat.json");
    assert_eq!(code, Some(1));
}
