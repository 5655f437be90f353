use std::process::Command;

use fpp_cli::rows::{from_csv, to_csv, to_json};
use fpp_cli::{run_experiment, Experiment, ExperimentConfig, ResultRow};

fn fpp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fpp"));
    c.env("RUST_LOG", "warn");
    c
}

fn cfg(experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig { experiment, ..ExperimentConfig::default() }
}

#[test]
fn alpha_at_p_one() {
    let c = ExperimentConfig { p: Some(1.0), n: Some(100), reps: 10, ..cfg(Experiment::Alpha) };
    let rows = run_experiment(&c).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].estimate, 1.0);
    assert_eq!(rows[0].stderr, Some(0.0));
}

#[test]
fn oracle_rows_all_match() {
    let c = ExperimentConfig { p_grid: Some(vec![0.3, 0.7]), reps: 40, ..cfg(Experiment::Oracle) };
    let rows = run_experiment(&c).unwrap();
    assert_eq!(rows.len(), 80);
    assert!(rows.iter().all(|r| r.ok == Some(true)));
}

#[test]
fn config_round_trips() {
    let c = ExperimentConfig {
        p_grid: Some(vec![0.7, 0.75]),
        p0: Some(0.8),
        q: Some(0.66),
        n_grid: Some(vec![10, 20]),
        eps: Some(0.1),
        direction: Some([0.25, 1.0]),
        alpha0: Some(0.1 + 0.2),
        workers: Some(3),
        out_path: Some("x.json".into()),
        ..cfg(Experiment::Probe)
    };
    let text = serde_json::to_string(&c).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
}

fn sample_rows() -> Vec<ResultRow> {
    let c = ExperimentConfig { p_grid: Some(vec![0.75, 0.9]), n: Some(30), reps: 7, seed: 12, ..cfg(Experiment::Fpt) };
    let mut rows = run_experiment(&c).unwrap();
    rows[0].estimate = 0.1 + 0.2;
    rows[1].ok = Some(false);
    rows
}

#[test]
fn csv_and_json_round_trip() {
    let rows = sample_rows();
    let csv = to_csv(&rows).unwrap();
    assert_eq!(from_csv(&csv).unwrap(), rows);
    let json: Vec<ResultRow> = serde_json::from_slice(&to_json(&rows).unwrap()).unwrap();
    assert_eq!(json, rows);
    let text = String::from_utf8(csv).unwrap();
    assert!(text.contains("3.0000000000000004e-1"));
}

#[test]
fn one_row_gives_two_lines() {
    let rows = sample_rows();
    let text = String::from_utf8(to_csv(&rows[..1]).unwrap()).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("experiment,statistic,a,b,p,p0,n,m,horizon,eps,replicate,estimate,stderr,reps,excluded,seed,alpha0,ok,version\n"));
}

#[test]
fn rows_are_rerunnable_from_their_fields() {
    let rows = sample_rows();
    let r = &rows[1];
    let again = ExperimentConfig {
        p: r.p,
        n: Some(r.n.unwrap() as usize),
        reps: r.reps as usize,
        seed: r.seed,
        a: r.a,
        b: r.b,
        ..cfg(Experiment::Fpt)
    };
    assert_eq!(run_experiment(&again).unwrap()[0].estimate, r.estimate);
}

#[test]
fn same_config_gives_identical_files_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        r#"{"experiment": "breakpoints", "p": 0.8, "n": 200, "horizon": 50, "reps": 12, "seed": 3}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (workers, ext) in [(1, "csv"), (2, "csv"), (4, "csv"), (1, "json"), (3, "json")] {
        let out = dir.path().join(format!("w{workers}.{ext}"));
        let status = fpp()
            .args(["breakpoints", "--config"])
            .arg(&config)
            .args(["--workers", &workers.to_string(), "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((ext, std::fs::read(&out).unwrap()));
    }
    assert_eq!(outputs[0].1, outputs[1].1);
    assert_eq!(outputs[0].1, outputs[2].1);
    assert_eq!(outputs[3].1, outputs[4].1);
    assert!(outputs[3].1.starts_with(b"["));
}

#[test]
fn exit_codes() {
    let ok = fpp().args(["alpha", "--p", "1", "--n", "10", "--reps", "2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8(ok.stdout).unwrap().lines().count(), 2);

    let subcritical = fpp().args(["alpha", "--p", "0.3", "--n", "10"]).output().unwrap();
    assert_eq!(subcritical.status.code(), Some(2));
    let missing = fpp().args(["tail", "--p", "0.8", "--n", "10"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let bad_file = fpp().args(["alpha", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(bad_file.status.code(), Some(2));

    let unwritable = fpp()
        .args(["alpha", "--p", "1", "--n", "10", "--reps", "2", "--out", "/nonexistent/dir/out.csv"])
        .output()
        .unwrap();
    assert_eq!(unwritable.status.code(), Some(4));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"p": 1.0, "n": 10, "reps": 3, "seed": 5}"#).unwrap();
    let out = fpp()
        .args(["fpt", "--config"])
        .arg(&config)
        .args(["--p", "0", "--seed", "9", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows: Vec<ResultRow> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows[0].p, Some(0.0));
    assert_eq!(rows[0].seed, 9);
    assert_eq!(rows[0].reps, 3);
    assert_eq!(rows[0].estimate, 2.0);
}
