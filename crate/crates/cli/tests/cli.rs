use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn iscap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iscap"))
        .args(args)
        .output()
        .expect("failed to launch iscap")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bundled_configs_validate() {
    for (name, kind) in [
        ("fig4.json", "sweep"),
        ("fig4_nt4.json", "sweep"),
        ("fig5.json", "sweep"),
        ("quick_sweep.json", "sweep"),
        ("quick_solve.json", "solve"),
        ("solve.json", "solve"),
        ("pareto.json", "pareto"),
    ] {
        let out = iscap(&["validate-config", "--kind", kind, "--config", path_str(&config(name))]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn missing_config_exits_2_and_names_path() {
    let out = iscap(&["sweep", "--config", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/definitely/not/here.json"));
}

#[test]
fn wrong_kind_is_a_config_error() {
    let out = iscap(&["validate-config", "--kind", "sweep", "--config", path_str(&config("solve.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("solve.json"), "{err}");
}

#[test]
fn sweep_without_config_is_usage_error() {
    let out = iscap(&["sweep"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = iscap(&[
            "solve", "--quiet", "--seed", "7", "--protocol", "PS",
            "--config", path_str(&config("quick_solve.json")), "--out", path_str(d),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ja = std::fs::read(a.join("solve.json")).unwrap();
    let jb = std::fs::read(b.join("solve.json")).unwrap();
    assert_eq!(ja, jb);
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["protocol"], "PS");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["report"]["status"], "Converged");
}

#[test]
fn unattainable_solve_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hard.json");
    std::fs::write(
        &cfg,
        r#"{ "scenario": { "n_tx": 2, "n_ris": 8 }, "fixed": { "rho": 0.5 },
             "qos": { "r_com_min": 1.0, "r_sense_min": 1.0, "e_min_total": 0.0005 },
             "solver": { "power_cap_dbm": 20.0 } }"#,
    )
    .unwrap();
    let out = iscap(&["solve", "--quiet", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("solve.json").exists());
}

#[test]
fn sweep_writes_csv_series_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = iscap(&[
        "sweep", "--quiet", "--trial-dump", "--protocol", "TS",
        "--config", path_str(&config("quick_sweep.json")), "--out", path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "protocol,axis,axis_value,mean_power_dbm,std_power_db,infeasible_rate,n_trials,mean_ao_iters"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.starts_with("TS,rho,")));
    assert!(dir.path().join("series_TS.dat").exists());
    assert!(!dir.path().join("series_PS.dat").exists());
    let dump = std::fs::read_to_string(dir.path().join("trials.jsonl")).unwrap();
    assert_eq!(dump.lines().count(), 9);
}

#[test]
fn sweep_output_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for jobs in ["1", "3"] {
        let d = dir.path().join(jobs);
        let out = iscap(&[
            "sweep", "--quiet", "--jobs", jobs,
            "--config", path_str(&config("quick_sweep.json")), "--out", path_str(&d),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read(d.join("sweep.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn zero_jobs_rejected() {
    let out = iscap(&["sweep", "--jobs", "0", "--config", path_str(&config("quick_sweep.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pareto_infeasible_budget_exits_1_with_header_only_front() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    std::fs::write(
        &cfg,
        r#"{ "scenario": { "n_tx": 4, "n_ris": 8 }, "budget_dbm": 30.0,
             "grid": [[0, 0.5, 0], [0, 1.0, 0]] }"#,
    )
    .unwrap();
    let out = iscap(&["pareto", "--quiet", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let front = std::fs::read_to_string(dir.path().join("front.csv")).unwrap();
    assert_eq!(front.trim_end(), "method,grid_id,comm_bpshz,sense_bpshz,wpt_mw,dominated,status");
}

#[test]
fn pareto_small_front() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    std::fs::write(
        &cfg,
        r#"{ "scenario": { "n_tx": 4, "n_ris": 8, "seed": 2 },
             "method": { "kind": "weighted_sum" },
             "grid": [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]] }"#,
    )
    .unwrap();
    let out = iscap(&["pareto", "--quiet", "--config", path_str(&cfg), "--out", path_str(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let front = std::fs::read_to_string(dir.path().join("front.csv")).unwrap();
    let rows: Vec<&str> = front.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[0], "weighted_sum");
        assert_eq!(f.len(), 7);
        for v in &f[2..5] {
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn seed_flag_overrides_every_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for cfg_seed in [1, 2] {
        let cfg = dir.path().join(format!("c{cfg_seed}.json"));
        std::fs::write(
            &cfg,
            format!(r#"{{ "scenario": {{ "n_tx": 4, "n_ris": 12, "seed": {cfg_seed} }}, "solver": {{ "seed": {cfg_seed} }} }}"#),
        )
        .unwrap();
        let out = dir.path().join(format!("o{cfg_seed}"));
        let o = iscap(&["solve", "--quiet", "--seed", "9", "--config", path_str(&cfg), "--out", path_str(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(std::fs::read(out.join("solve.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn bad_protocol_is_usage_error() {
    let out = iscap(&["solve", "--protocol", "XS"]);
    assert_eq!(out.status.code(), Some(2));
}
