use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn congtax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_congtax"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &TempDir, name: &str, value: &Value) -> String {
    let path = dir.path().join(name);
    fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn symmetric_instance() -> Value {
    serde_json::json!({
        "basis": [{"kind": "monomial", "degree": 1.0}],
        "resources": [{"coeffs": [1.0]}, {"coeffs": [1.0]}],
        "players": [{"strategies": [[0], [1]]}, {"strategies": [[0], [1]]}]
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn analyze_linear_and_constant() {
    let v = stdout_json(&congtax(&[
        "analyze-basis",
        "--monomial",
        "1",
        "--monomial",
        "0",
    ]));
    let reports = v["reports"].as_array().unwrap();
    assert!(close(reports[0]["rho"]["rho"].as_f64().unwrap(), 2.0, 1e-9));
    assert!(close(reports[0]["mu"].as_f64().unwrap(), 2.0, 1e-6));
    assert!(close(reports[1]["rho"]["rho"].as_f64().unwrap(), 1.0, 1e-9));
    assert_eq!(reports[0]["rho"]["infinite"], Value::Bool(false));
    let bell: Vec<f64> = v["bell"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["bell"].as_f64().unwrap())
        .collect();
    for (got, want) in bell.iter().zip([1.0, 2.0, 5.0, 15.0, 52.0]) {
        assert!(close(*got, want, 1e-9));
    }
}

#[test]
fn analyze_table_needs_extension_for_mu() {
    let v = stdout_json(&congtax(&["analyze-basis", "--table", "2,3"]));
    let r = &v["reports"][0];
    assert!(close(r["rho"]["rho"].as_f64().unwrap(), 1.5, 1e-9));
    assert_eq!(r["mu"], Value::Null);
    assert_eq!(r["mu_status"], "unsupported");

    let v = stdout_json(&congtax(&[
        "analyze-basis",
        "--table",
        "2,3",
        "--monomial-like",
    ]));
    assert!(close(v["reports"][0]["mu"].as_f64().unwrap(), 2.0, 1e-6));
}

#[test]
fn analyze_flags_infinite_rho() {
    let v = stdout_json(&congtax(&["analyze-basis", "--exponential", "1e6"]));
    assert_eq!(v["reports"][0]["rho"]["infinite"], Value::Bool(true));
    assert_eq!(v["reports"][0]["rho"]["rho"], Value::Null);
}

#[test]
fn analyze_writes_csv_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let status = congtax(&[
        "analyze-basis",
        "--monomial",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let basis = fs::read_to_string(out.join("basis.csv")).unwrap();
    assert!(basis.starts_with("basis,rho,mu\n\"x^2\",5"));
    let bell = fs::read_to_string(out.join("bell.csv")).unwrap();
    assert!(bell.starts_with("d,bell\n"));
    assert_eq!(bell.lines().count(), 6);
    assert!(out.join("config.json").exists());
}

#[test]
fn parse_errors_exit_two() {
    assert_eq!(
        congtax(&["analyze-basis", "--poly", "1:x"]).status.code(),
        Some(2)
    );
    assert_eq!(congtax(&["analyze-basis"]).status.code(), Some(2));
    assert_eq!(
        congtax(&["analyze-basis", "--monomial", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(congtax(&["no-such-command"]).status.code(), Some(2));

    let dir = TempDir::new().unwrap();
    let bad = write(
        &dir,
        "bad.json",
        &serde_json::json!({"basis": [], "resources": [], "players": []}),
    );
    assert_eq!(
        congtax(&["design", "--instance", &bad]).status.code(),
        Some(2)
    );
    let path = dir.path().join("garbage.json");
    fs::write(&path, "{not json").unwrap();
    assert_eq!(
        congtax(&["oracle", "--instance", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn design_symmetric_instance() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "inst.json", &symmetric_instance());
    let v = stdout_json(&congtax(&["design", "--instance", &inst]));
    for stage in ["relaxation", "taxes", "audit", "poa", "smoothness"] {
        assert_eq!(v[stage]["status"], "ok", "stage {stage}");
    }
    assert!(v["poa"]["result"]["poa"].as_f64().unwrap() <= 2.0 + 1e-3);
    assert!(close(
        v["relaxation"]["result"]["objective"].as_f64().unwrap(),
        4.0,
        1e-9
    ));
}

#[test]
fn design_single_strategy_instance() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "inst.json",
        &serde_json::json!({
            "basis": [{"kind": "monomial", "degree": 2.0}],
            "resources": [{"coeffs": [1.0]}, {"coeffs": [3.0]}],
            "players": [{"strategies": [[0, 1]]}, {"strategies": [[1]]}]
        }),
    );
    let v = stdout_json(&congtax(&["design", "--instance", &inst]));
    assert_eq!(v["taxes"]["status"], "ok");
    assert_eq!(v["poa"]["result"]["poa"].as_f64(), Some(1.0));
}

#[test]
fn design_records_infinite_rho_stage() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "inst.json",
        &serde_json::json!({
            "basis": [{"kind": "table", "values": [1.0, 1e154, 1e308]}],
            "resources": [{"coeffs": [1.0]}, {"coeffs": [1.0]}],
            "players": [{"strategies": [[0], [1]]}, {"strategies": [[0], [1]]}]
        }),
    );
    let v = stdout_json(&congtax(&["design", "--instance", &inst]));
    assert_eq!(v["rho"], Value::Null);
    assert_eq!(v["relaxation"]["status"], "infinite-rho");
    assert_eq!(v["smoothness"]["status"], "skipped");
}

fn designed(dir: &TempDir) -> (String, String) {
    let inst = write(dir, "inst.json", &symmetric_instance());
    let out = dir.path().join("design");
    assert!(congtax(&[
        "design",
        "--instance",
        &inst,
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    (inst, out.join("taxes.json").to_str().unwrap().to_string())
}

#[test]
fn learn_smoke_run() {
    let dir = TempDir::new().unwrap();
    let (inst, taxes) = designed(&dir);
    let out = dir.path().join("learn");
    let status = congtax(&[
        "learn",
        "--instance",
        &inst,
        "--taxes",
        &taxes,
        "--rounds",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let trace = fs::read_to_string(out.join("trace_seed0.jsonl")).unwrap();
    let lines: Vec<Value> = trace
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].get("footer").is_some());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn learn_ratios_on_symmetric_instance() {
    let dir = TempDir::new().unwrap();
    let (inst, taxes) = designed(&dir);
    let bundle = dir.path().join("design").join("bundle.json");
    let out = congtax(&[
        "learn",
        "--instance",
        &inst,
        "--taxes",
        bundle.to_str().unwrap(),
        "--seeds",
        "0,1,2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let ratio: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ratio <= 2.0 + 0.05, "{row}");
    }
    // taxes given directly are accepted too
    assert!(congtax(&[
        "learn",
        "--instance",
        &inst,
        "--taxes",
        &taxes,
        "--rounds",
        "10"
    ])
    .status
    .success());
}

#[test]
fn replay_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let (inst, taxes) = designed(&dir);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let run = congtax(&[
        "learn",
        "--instance",
        &inst,
        "--taxes",
        &taxes,
        "--rounds",
        "300",
        "--seeds",
        "4,5",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let config = first.join("config.json");
    assert!(congtax(&[
        "replay",
        "--config",
        config.to_str().unwrap(),
        "--out",
        second.to_str().unwrap()
    ])
    .status
    .success());
    for name in ["trace_seed4.jsonl", "trace_seed5.jsonl", "summary.csv"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn forge_random_instance_is_valid() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("forge");
    assert!(congtax(&[
        "forge",
        "random",
        "--players",
        "3",
        "--resources",
        "3",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let inst = read_json(&out.join("instance.json"));
    assert_eq!(inst["players"].as_array().unwrap().len(), 3);
    assert_eq!(inst["resources"].as_array().unwrap().len(), 3);
    // the generated file is accepted by the oracle
    let v = stdout_json(&congtax(&[
        "oracle",
        "--instance",
        out.join("instance.json").to_str().unwrap(),
    ]));
    assert!(v["poa"]["num_pure_ne"].as_u64().unwrap() >= 1);
}

#[test]
fn forge_partition_reports_verification() {
    let v = stdout_json(&congtax(&[
        "forge",
        "partition",
        "--n",
        "120",
        "--beta",
        "4",
        "--h",
        "3",
        "--k",
        "2",
        "--eta",
        "0.9",
    ]));
    assert_eq!(v["report"]["p1_pass"], Value::Bool(true));
    assert_eq!(v["report"]["p2_coverage"]["mode"], "exhaustive");
    assert!(v["report"]["p2_worst_margin"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["blocks"].as_array().unwrap().len(), 4);
}

#[test]
fn forge_partition_failure_exits_four() {
    // two singleton partitions of {0, 1}: some transversal always picks distinct elements
    let out = congtax(&[
        "forge",
        "partition",
        "--n",
        "2",
        "--beta",
        "2",
        "--h",
        "2",
        "--k",
        "1",
        "--eta",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("margin"));
}

#[test]
fn forge_reduce_has_one_player_per_left_vertex() {
    let dir = TempDir::new().unwrap();
    let lc = write(
        &dir,
        "lc.json",
        &serde_json::json!({
            "left": 3, "right": 1, "edges": [[0, 0], [1, 0], [2, 0]],
            "h": 3, "alpha": 2, "beta": 2,
            "pi": {"0,0": [0, 1], "1,0": [1, 0], "2,0": [0, 0]}
        }),
    );
    let out = dir.path().join("reduce");
    let run = congtax(&[
        "forge",
        "reduce",
        "--labelcover",
        &lc,
        "--n",
        "6",
        "--k",
        "1",
        "--eta",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let inst = read_json(&out.join("instance.json"));
    let players = inst["players"].as_array().unwrap();
    assert_eq!(players.len(), 3);
    assert!(players
        .iter()
        .all(|p| p["strategies"].as_array().unwrap().len() == 2));
    assert!(out.join("partition.json").exists());
}

#[test]
fn oracle_with_taxes() {
    let dir = TempDir::new().unwrap();
    let (inst, taxes) = designed(&dir);
    let v = stdout_json(&congtax(&[
        "oracle",
        "--instance",
        &inst,
        "--taxes",
        &taxes,
    ]));
    assert_eq!(v["poa"]["enumerated_profiles"], 4);
    assert!(close(v["poa"]["min_cost"].as_f64().unwrap(), 2.0, 1e-12));
}
