use std::path::Path;
use std::process::{Command, Output};

fn timeopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timeopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn calibrate(dir: &Path, qubits: &str) -> std::path::PathBuf {
    let gs = dir.join("gateset.json");
    let out = timeopt(&[
        "calibrate",
        "--mode",
        "static",
        "--durations",
        "32,64,120",
        "--qubits",
        qubits,
        "--out",
        s(&gs),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    gs
}

#[test]
fn calibrate_then_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let gs = calibrate(dir.path(), "2");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&gs).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);

    let circuit = dir.path().join("c.txt");
    std::fs::write(
        &circuit,
        "sx q0\nsx q0\nsx q0\nsx q1\necr q0 q1\nu3 q1 pi/2,0,pi\nmeasure q0\nmeasure q1\n",
    )
    .unwrap();
    let sched = dir.path().join("s.json");
    let dot = dir.path().join("g.dot");
    let out = timeopt(&[
        "schedule",
        s(&circuit),
        "--gateset",
        s(&gs),
        "--out",
        s(&sched),
        "--dot",
        s(&dot),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sched).unwrap()).unwrap();
    assert_eq!(j["width"], 2);
    assert_eq!(j["dt_ns"], 0.5);
    let q1 = j["qubits"][1].as_array().unwrap();
    assert_eq!(q1[0]["kind"], "sx");
    assert_eq!(q1[0]["duration_dt"], 64, "stretched into the slack");
    assert!(std::fs::read_to_string(&dot)
        .unwrap()
        .starts_with("digraph"));

    let fixed = dir.path().join("f.json");
    let out = timeopt(&[
        "schedule",
        s(&circuit),
        "--gateset",
        s(&gs),
        "--no-optimize",
        "--out",
        s(&fixed),
    ]);
    assert!(out.status.success());
    let f: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fixed).unwrap()).unwrap();
    assert_eq!(f["makespan_dt"], j["makespan_dt"]);
    assert_eq!(f["qubits"][1][0]["duration_dt"], 32);
}

#[test]
fn rabi_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rabi.csv");
    let out = timeopt(&[
        "rabi",
        "--amplitudes",
        "0.001,0.01",
        "--samples",
        "32",
        "--out",
        s(&csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("amplitude,time_ns,p0,fit_p0\n"));
    assert_eq!(text.lines().count(), 1 + 64);
    assert!(String::from_utf8_lossy(&out.stdout).contains("omega"));
}

#[test]
fn rb_writes_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("rb");
    let out = timeopt(&[
        "rb",
        "--qubits",
        "2",
        "--lengths",
        "1,5",
        "--mode",
        "static",
        "--min-dur",
        "32",
        "--max-dur",
        "512",
        "--shots",
        "64",
        "--seed",
        "3",
        "--circuits",
        "2",
        "--out-dir",
        s(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["rbresult.csv", "durations.csv", "timescale.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let rb = std::fs::read_to_string(out_dir.join("rbresult.csv")).unwrap();
    assert_eq!(rb.lines().count(), 1 + 2 * 2 * 2);

    let again = dir.path().join("rb2");
    let out = timeopt(&[
        "rb",
        "--qubits",
        "2",
        "--lengths",
        "1,5",
        "--min-dur",
        "32",
        "--shots",
        "64",
        "--seed",
        "3",
        "--circuits",
        "2",
        "--out-dir",
        s(&again),
    ]);
    assert!(out.status.success());
    assert_eq!(
        rb,
        std::fs::read_to_string(again.join("rbresult.csv")).unwrap()
    );
}

#[test]
fn noiseless_ideal_rb_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("rb");
    let out = timeopt(&[
        "rb",
        "--qubits",
        "3",
        "--lengths",
        "1,3",
        "--circuits",
        "2",
        "--noiseless",
        "--ideal",
        "--shots",
        "0",
        "--out-dir",
        s(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut r = csv_rows(&out_dir.join("rbresult.csv"));
    let header = r.remove(0);
    let col = header.iter().position(|h| h == "p0").unwrap();
    assert!(r
        .iter()
        .all(|row| (row[col].parse::<f64>().unwrap() - 1.0).abs() < 1e-6));
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "frobnicate q0\n").unwrap();
    let gs = calibrate(dir.path(), "1");
    let out = timeopt(&[
        "schedule",
        s(&bad),
        "--gateset",
        s(&gs),
        "--out",
        s(&dir.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = timeopt(&[
        "rb",
        "--qubits",
        "4",
        "--lengths",
        "1",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let noise = dir.path().join("noise.json");
    std::fs::write(&noise, r#"{"qubits":[{"t1_ns":10.0,"t2_ns":50.0,"anharmonicity_hz":-3.3e8,"rabi_coefficient_hz":1.05e8}],"ecr_fidelity":0.99,"dt_ns":0.5}"#).unwrap();
    let out = timeopt(&[
        "rb",
        "--qubits",
        "1",
        "--lengths",
        "1",
        "--noise",
        s(&noise),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = timeopt(&[
        "calibrate",
        "--mode",
        "static",
        "--durations",
        "16",
        "--out",
        s(&dir.path().join("g.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulation_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let gs_path = calibrate(dir.path(), "2");
    let mut gs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&gs_path).unwrap()).unwrap();
    for row in gs["rows"].as_array_mut().unwrap() {
        row["amplitude"] = serde_json::json!(1.5);
    }
    std::fs::write(&gs_path, gs.to_string()).unwrap();
    let out = timeopt(&[
        "rb",
        "--qubits",
        "2",
        "--lengths",
        "1",
        "--circuits",
        "1",
        "--gateset",
        s(&gs_path),
        "--min-dur",
        "32",
        "--max-dur",
        "120",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
