//! End-to-end tests of the `bfctl` binary: subcommand wiring, exit-code
//! taxonomy, CSV schemas and config round-trips.

use std::path::Path;
use std::process::{Command, Output};

fn bfctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfctl"))
        .args(args)
        .output()
        .expect("failed to launch bfctl")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const TABLE_A1: &str = r#"{"g1":2,"g2":4,"r":4,"m":1,"p":0.6,"q":1.0,"arrivals":0.39}"#;

#[test]
fn solve_reports_table_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", TABLE_A1);
    let out = bfctl(&["solve", "--config", &cfg, "--nmax", "20"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    let means = v["metrics"]["per_slot_mean"].as_array().unwrap();
    assert!((means[0].as_f64().unwrap() - 3.9010622).abs() < 1e-6);
    assert_eq!(v["roots"].as_array().unwrap().len() >= 5, true);
    assert_eq!(v["winding"], 6);
}

#[test]
fn compare_solve_oracle_is_tight_and_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", TABLE_A1);
    let ab = bfctl(&["compare", "solve", "oracle", "--config", &cfg]);
    assert!(ab.status.success());
    let va: serde_json::Value = serde_json::from_slice(&ab.stdout).unwrap();
    assert!(va["sup_pmf_dist"].as_f64().unwrap() <= 1e-7);
    let ba = bfctl(&["compare", "oracle", "solve", "--config", &cfg]);
    let vb: serde_json::Value = serde_json::from_slice(&ba.stdout).unwrap();
    assert_eq!(va["max_abs_mean_diff"], vb["max_abs_mean_diff"]);
    assert_eq!(va["sup_pmf_dist"], vb["sup_pmf_dist"]);
}

#[test]
fn unstable_config_exits_3_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "u.json",
        r#"{"g1":2,"g2":4,"r":4,"m":1,"p":1.0,"q":1.0,"arrivals":0.41}"#,
    );
    let out = bfctl(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "Unstable");
    assert_eq!(v["error"]["details"]["r0"], 4.0);
    assert!((v["error"]["details"]["arrival_load"].as_f64().unwrap() - 4.1).abs() < 1e-12);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"g1":2,"nope":1}"#);
    let out = bfctl(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let g2zero = write_config(
        dir.path(),
        "g2.json",
        r#"{"g1":2,"g2":0,"r":4,"m":1,"p":0.5,"q":1.0,"arrivals":0.2}"#,
    );
    let out = bfctl(&["solve", "--config", &g2zero]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["error"]["message"].as_str().unwrap().contains("G2Zero"));
}

#[test]
fn sweep_p_produces_monotone_cdf_columns_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", TABLE_A1);
    let dump = dir.path().join("configs");
    let out = bfctl(&[
        "sweep",
        "--config",
        &cfg,
        "--engine",
        "solve",
        "--param",
        "p",
        "--range",
        "0:1:6",
        "--dump-configs",
        dump.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("schema_version,index,param,value,status"));
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    // Rows come back in sweep order regardless of worker scheduling, all
    // padded to the header width, and cdf0 (column 11) must not increase
    // with p.
    let width = header.split(',').count();
    let mut prev = f64::INFINITY;
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), width);
        assert_eq!(row[1], n.to_string());
        assert_eq!(row[4], "ok");
        let cdf0: f64 = row[11].parse().unwrap();
        assert!(cdf0 <= prev + 1e-9);
        prev = cdf0;
    }
    // Dumped configs re-parse into identical validated models.
    for idx in 0..6usize {
        let path = dump.join(format!("sweep_{idx:04}.json"));
        let text = std::fs::read_to_string(&path).unwrap();
        let reparsed = bfctl::parse_config(&text).unwrap().validate().unwrap();
        assert_eq!(reparsed.p, vec![idx as f64 / 5.0; 2]);
        assert_eq!(reparsed.q, vec![1.0; 2]);
    }
}

#[test]
fn sweep_other_engines_and_skipped_rows_pad_to_width() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", TABLE_A1);
    for engine in ["oracle", "simulate"] {
        let out = bfctl(&[
            "sweep",
            "--config",
            &cfg,
            "--engine",
            engine,
            "--param",
            "arrivals.mean",
            "--range",
            // The last point exceeds the 4.56/cycle capacity.
            "0.2,0.39,0.47",
            "--cycles",
            "500",
            "--runs",
            "4",
            "--truncation",
            "80",
        ]);
        assert!(out.status.success(), "{engine}");
        let text = String::from_utf8(out.stdout).unwrap();
        let mut lines = text.lines();
        let width = lines.next().unwrap().split(',').count();
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.split(',').count(), width, "{engine}: {row}");
        }
        assert!(rows[0].contains(",ok,"));
        // The simulator runs any load; the oracle refuses unstable input.
        if engine == "oracle" {
            assert!(rows[2].contains("skipped"), "{engine}: {}", rows[2]);
        }
    }
}

#[test]
fn scenario_expansion_matches_layouts() {
    let out = bfctl(&[
        "scenario",
        "--layout",
        "case2",
        "--mu",
        "1.0",
        "--expand-only",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lanes = v.as_array().unwrap();
    assert_eq!(lanes.len(), 2);
    assert_eq!(lanes[0]["p"][0], 1.0);
    assert_eq!(lanes[0]["arrivals"][0]["mean"], 0.3);
    assert_eq!(lanes[1]["p"][0], 0.0);
    assert_eq!(lanes[1]["arrivals"][0]["mean"], 0.7);

    let out = bfctl(&[
        "scenario",
        "--layout",
        "case2b",
        "--mu",
        "1.0",
        "--expand-only",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lanes = v.as_array().unwrap();
    assert_eq!(lanes[0]["p"][0], 0.75);
    assert_eq!(lanes[0]["arrivals"][0]["mean"], 0.4);
    assert_eq!(lanes[1]["arrivals"][0]["mean"], 0.6);

    let out = bfctl(&["scenario", "--layout", "nope", "--mu", "1.0"]);
    assert_eq!(out.status.code(), Some(2));

    // mu = 0: both lanes trivial, totals zero up to round-off.
    let out = bfctl(&["scenario", "--layout", "case2", "--mu", "0"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["total_mean_queue"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn capacity_hcm_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    // Slot length 2 s: g1 = 10 slots, g2 = 5 slots, cycle 45 slots.
    let cfg = write_config(
        dir.path(),
        "h.json",
        r#"{"g1":10,"g2":5,"r":30,"m":1,"p":1.0,"q":0.5,"arrivals":0.01}"#,
    );
    let out = bfctl(&[
        "capacity",
        "--config",
        &cfg,
        "--service-correction",
        "1,2,1",
        "--hcm",
        "30,1,2,0.6666666666666666",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // q = 1/2 realises f_Rpb = 2/3; both sides give 10 vehicles/cycle.
    assert!((v["r0"].as_f64().unwrap() - 10.0).abs() < 1e-12);
    assert!((v["hcm"]["s_sr"].as_f64().unwrap() - 10.0).abs() < 1e-12);

    let out = bfctl(&[
        "capacity",
        "--config",
        &cfg,
        "--service-correction",
        "1,2,1",
        "--hcm",
        "30,1,2,1",
        "--sweep",
        "f_Rpb=0.3333333333333333:1:4",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        let r0: f64 = cols[2].parse().unwrap();
        let hcm: f64 = cols[4].parse().unwrap();
        assert!((r0 - hcm).abs() < 1e-9, "{row}");
    }
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", TABLE_A1);
    let args = [
        "simulate", "--config", &cfg, "--cycles", "500", "--runs", "8", "--seed", "99",
    ];
    let a = bfctl(&args);
    let b = bfctl(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut args2 = args;
    args2[7] = "100";
    let c = bfctl(&args2);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn oracle_csv_has_truncation_field_in_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", TABLE_A1);
    let out = bfctl(&["oracle", "--config", &cfg, "--truncation", "120"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["truncation_mass"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["truncation_level"], 120);
    let csv = bfctl(&["oracle", "--config", &cfg, "--csv", "overflow"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("schema_version,n,pmf,cdf"));
}
