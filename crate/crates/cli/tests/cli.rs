use std::path::Path;
use std::process::{Command, Output};

fn bdris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdris"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let mut cfg = bdris_core::model::SystemConfig::default();
    cfg.network.n_users = 2;
    cfg.network.n_antennas = 2;
    cfg.network.n_elements = 4;
    cfg.network.n_groups = 2;
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = bdris(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn validate_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("n_groups = 2", "n_groups = 3");
    std::fs::write(&cfg, text).unwrap();
    let out = bdris(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("n_groups"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("[network]", "[network]\nn_drones = 2");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(bdris(&["validate", "--config", &cfg]).status.code(), Some(2));
    let out_dir = dir.path().join("out");
    let out = bdris(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_identical_rows_twice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut rows = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = bdris(&[
            "run",
            "--config",
            &cfg,
            "--preset",
            "latency-vs-N",
            "--trials",
            "1",
            "--scheme",
            "proposed,binary",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        rows.push(std::fs::read(out_dir.join("rows.csv")).unwrap());
        assert!(out_dir.join("summary.csv").exists());
        assert!(out_dir.join("trace.jsonl").exists());
    }
    assert_eq!(rows[0], rows[1]);
    let text = String::from_utf8(rows[0].clone()).unwrap();
    // 4 grid points x 1 trial x 2 schemes x 1 arch, plus the header
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn unreachable_floor_everywhere_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("gamma_min_db = 0.0", "gamma_min_db = 80.0");
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = bdris(&[
        "run",
        "--config",
        &cfg,
        "--preset",
        "convergence",
        "--trials",
        "1",
        "--arch",
        "sc",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("rows.csv").exists());
}

#[test]
fn bad_flag_value_is_rejected() {
    let out = bdris(&["run", "--preset", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bdris(&["run", "--arch", "gc7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replay_reproduces_dumped_channels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let ch_dir = dir.path().join("ch");
    let out = bdris(&[
        "run",
        "--config",
        &cfg,
        "--preset",
        "convergence",
        "--trials",
        "1",
        "--seed",
        "7",
        "--arch",
        "gc",
        "--out",
        out_dir.to_str().unwrap(),
        "--dump-channels",
        ch_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ch = ch_dir.join("channels_g0_t0.bin");
    let rep = bdris(&[
        "replay",
        "--config",
        &cfg,
        "--seed",
        "7",
        "--channels",
        ch.to_str().unwrap(),
        "--arch",
        "gc",
    ]);
    assert_eq!(rep.status.code(), Some(0), "{}", String::from_utf8_lossy(&rep.stderr));
    let stdout = String::from_utf8(rep.stdout).unwrap();
    let line: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(line["metrics"].is_object());
    // parsed from the text so the comparison is exact
    let key = "\"max_latency_s\":";
    let start = stdout.find(key).unwrap() + key.len();
    let len = stdout[start..].find(',').unwrap();
    let replayed: f64 = stdout[start..start + len].parse().unwrap();

    let rows = std::fs::read_to_string(out_dir.join("rows.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(rows.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "max_latency_s").unwrap();
    let rec = rdr.records().next().unwrap().unwrap();
    let original: f64 = rec[col].parse().unwrap();
    assert_eq!(replayed, original);
}

#[test]
fn replay_rejects_wrong_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let ch_dir = dir.path().join("ch");
    let out = bdris(&[
        "run",
        "--config",
        &cfg,
        "--preset",
        "convergence",
        "--trials",
        "1",
        "--arch",
        "gc",
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--dump-channels",
        ch_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let ch = ch_dir.join("channels_g0_t0.bin");
    // default config has other dimensions
    let rep = bdris(&["replay", "--channels", ch.to_str().unwrap()]);
    assert_eq!(rep.status.code(), Some(2));
}
