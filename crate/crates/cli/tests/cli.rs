use std::process::{Command, Output};

fn coflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = coflow(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const ALL: &str = "corba,corba-fast,mincct-s,mincct-m,mincct-sm";

#[test]
fn offline_grid_has_one_row_per_seed_and_algorithm() {
    let csv = stdout(&["offline", "--seeds", "1..20", "--algo", ALL]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "seed,algo,k,n_flows,cct_s,alloc_gbps,avg_hops,runtime_s");
    assert_eq!(lines.len(), 101);
    assert!(lines[1].starts_with("1,corba,4,10,"));
    assert!(lines[100].starts_with("20,mincct-sm,"));
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let a = coflow(&["offline", "--seeds", "1..6", "--algo", ALL, "--jobs", "1"]);
    let b = coflow(&["offline", "--seeds", "1..6", "--algo", ALL, "--jobs", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let online = [
        "online", "--seeds", "1,2", "--algo", "corba-fast,mincct-s", "--set", "k=4", "--set", "cutoff=60",
        "--set", "flows_per_coflow=5", "--set", "coflow_rate=0.05",
    ];
    assert_eq!(coflow(&online).stdout, coflow(&online).stdout);
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    let out = coflow(&["offline", "--set", "n_flow=5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_flow"));

    let dir = std::env::temp_dir().join(format!("coflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "k = 4\n[noise]\nrate_maximum = 2.0\n").unwrap();
    let out = coflow(&["offline", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate_maximum"));
}

#[test]
fn config_files_and_overrides_combine() {
    let dir = std::env::temp_dir().join(format!("coflow-cli-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let toml = dir.join("c.toml");
    std::fs::write(&toml, "n_flows = 4\nalgorithm = \"corba-fast\"\n").unwrap();
    let json = dir.join("c.json");
    std::fs::write(&json, r#"{"n_flows": 4, "algorithm": "corba-fast"}"#).unwrap();
    let a = stdout(&["offline", "--config", toml.to_str().unwrap(), "--seeds", "2"]);
    let b = stdout(&["offline", "--config", json.to_str().unwrap(), "--seeds", "2"]);
    assert_eq!(a, b);
    assert!(a.lines().nth(1).unwrap().starts_with("2,corba-fast,4,4,"));
    let c = stdout(&["offline", "--config", toml.to_str().unwrap(), "--seeds", "2", "--set", "n_flows=6"]);
    assert!(c.lines().nth(1).unwrap().starts_with("2,corba-fast,4,6,"));
}

#[test]
fn sweep_walks_the_grid() {
    let csv = stdout(&["sweep", "n_flows=2..6:2", "--seeds", "1..2", "--algo", "corba-fast"]);
    let n: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(n, ["2", "2", "4", "4", "6", "6"]);
}

#[test]
fn timing_fills_the_runtime_column() {
    let csv = stdout(&["offline", "--seeds", "1", "--algo", "corba-fast", "--timing"]);
    let runtime = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap();
    assert!(runtime.parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn topology_is_json() {
    let json = stdout(&["topo", "--set", "k=4"]);
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["links"].as_array().unwrap().len(), 64);
}
