//! End-to-end runs of the compiled binary on temp-file instances.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transship-kit"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("transship-kit-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &PathBuf, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

const GRAPH: &str = "6 7 0\n0 1 2\n1 2 3\n2 3 1\n3 4 4\n4 5 2\n0 5 9\n1 4 6\n";

#[test]
fn sssp_then_verify_round_trips() {
    let dir = workdir("sssp");
    let g = write(&dir, "g.txt", GRAPH);
    let tree = dir.join("tree.json");
    let rounds = dir.join("rounds.json");
    let out = bin()
        .args(["sssp", "--graph"])
        .arg(&g)
        .args(["--source", "0", "--eps", "0.5", "--out"])
        .arg(&tree)
        .arg("--rounds-report")
        .arg(&rounds)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["status"] == true));
    let ledger: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&rounds).unwrap()).unwrap();
    assert!(ledger["rounds"].as_u64().unwrap() > 0);

    let out = bin()
        .args(["verify", "--graph"])
        .arg(&g)
        .args(["--against", "sssp", "--output"])
        .arg(&tree)
        .args(["--eps", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn transship_and_route_agree_with_the_oracle() {
    let dir = workdir("transship");
    let g = write(&dir, "g.txt", GRAPH);
    let b = write(&dir, "b.txt", "0 -3\n3 2\n5 1\n");
    let pair = dir.join("pair.json");
    let out = bin()
        .args(["transship", "--graph"])
        .arg(&g)
        .arg("--demand")
        .arg(&b)
        .args(["--eps", "0.25", "--out"])
        .arg(&pair)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["route", "--graph"])
        .arg(&g)
        .arg("--demand")
        .arg(&b)
        .arg("--report-ratio")
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["ratio"].as_f64().unwrap() >= 1.0 - 1e-9);
}

#[test]
fn round_flow_and_euler_orient_run() {
    let dir = workdir("round");
    let g = write(&dir, "g.txt", GRAPH);
    // Unit flow 0 -> 1 -> 2 -> 3 along canonical directions.
    let flow = write(
        &dir,
        "flow.json",
        r#"{ "edge_count": 7, "values": [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0] }"#,
    );
    let out = bin()
        .args(["round-flow", "--graph"])
        .arg(&g)
        .arg("--flow")
        .arg(&flow)
        .args(["--source", "0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let tri = write(&dir, "tri.txt", "3 3 0\n0 1 1\n1 2 1\n0 2 1\n");
    let out = bin().args(["euler-orient", "--graph"]).arg(&tri).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn bad_inputs_exit_with_contract_code() {
    let dir = workdir("bad");
    let g = write(&dir, "g.txt", "2 1 0\n0 1 0\n"); // zero length
    let out = bin()
        .args(["sssp", "--graph"])
        .arg(&g)
        .args(["--source", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
