use std::path::{Path, PathBuf};

use ed_sim::artifacts::{Manifest, MANIFEST};
use ed_sim::config::{preset, ExperimentConfig};
use ed_sim::report::read_ledger;
use ed_sim::{run, Outcome, SimError};

fn small_ensemble(name: &str) -> ExperimentConfig {
    let mut cfg = preset("harmonic-ensemble").unwrap();
    cfg.name = name.into();
    cfg.numerics.as_mut().unwrap().steps = 40;
    let s = cfg.sampling.as_mut().unwrap();
    s.members = 3000;
    s.checkpoints = 2;
    s.calibration_draws = 30;
    cfg
}

fn report(runs: &[&Path], out: &Path) -> ed_sim::Result<ed_sim::report::ReportSummary> {
    let cfg = ExperimentConfig::report(runs.iter().map(|p| p.display().to_string()).collect());
    match run(&cfg, out, None)?.outcome {
        Outcome::Report(s) => Ok(s),
        _ => unreachable!(),
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn single_run_report_is_the_identity_on_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    run(&preset("entropic-step").unwrap(), &a, None).unwrap();
    let out = tmp.path().join("rep");
    let s = report(&[&a], &out).unwrap();
    let rows = read_ledger(&a).unwrap();
    assert_eq!(s.rows, rows.len());
    assert_eq!(s.passed + s.failed, rows.iter().filter(|r| r.passed.is_some()).count());
    let merged = std::fs::read(out.join("merged_ledger.jsonl")).unwrap();
    assert_eq!(merged, std::fs::read(a.join("ledger.jsonl")).unwrap());
    let (header, table) = read_csv(&out.join("summary.csv"));
    assert_eq!(header, ["run", "config_hash", "section", "name", "value", "threshold", "passed"]);
    assert_eq!(table.len(), rows.len());
    for (t, r) in table.iter().zip(&rows) {
        assert_eq!(t[3], r.name);
        assert_eq!(t[1], r.config_hash);
    }
    assert!(!out.join("divergence.csv").exists());
}

#[test]
fn empty_run_list_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = report(&[], tmp.path()).unwrap_err();
    assert!(matches!(err, SimError::Config { ref field, .. } if field == "report.runs"), "{err}");
}

#[test]
fn mixed_schema_versions_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&preset("entropic-step").unwrap(), &a, None).unwrap();
    run(&preset("entropic-step").unwrap(), &b, None).unwrap();
    let mut m = Manifest::read(&b).unwrap();
    m.schema += 1;
    std::fs::write(b.join(MANIFEST), serde_json::to_vec(&m).unwrap()).unwrap();
    let err = report(&[&a, &b], &tmp.path().join("rep")).unwrap_err();
    assert!(err.to_string().contains("mixed schema"), "{err}");
}

#[test]
fn incomplete_runs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    run(&preset("entropic-step").unwrap(), &a, None).unwrap();
    std::fs::write(a.join("PARTIAL"), "x").unwrap();
    assert!(report(&[&a], &tmp.path().join("rep")).is_err());
}

#[test]
fn ensembles_appear_side_by_side() {
    let tmp = tempfile::tempdir().unwrap();
    let a: PathBuf = tmp.path().join("a");
    let b: PathBuf = tmp.path().join("b");
    run(&small_ensemble("first"), &a, None).unwrap();
    run(&small_ensemble("second"), &b, None).unwrap();
    let out = tmp.path().join("rep");
    let s = report(&[&a, &b], &out).unwrap();
    assert_eq!(s.divergence_columns, ["0:first/ou", "0:first/es", "1:second/ou", "1:second/es"]);
    assert_eq!(s.runs.len(), 2);
    let (header, rows) = read_csv(&out.join("divergence.csv"));
    assert_eq!(header.len(), 2 + 3 * 4);
    assert_eq!(header[2], "0:first/ou:total_variation");
    assert_eq!(header[13], "1:second/es:verdict");
    assert_eq!(rows.len(), 2);
    // the cells match the per-run ledgers
    let ledger = read_ledger(&b).unwrap();
    let es1 = ledger.iter().find(|r| r.name == "es/1").unwrap();
    assert_eq!(rows[1][11], es1.value.unwrap().to_string());
    for row in &rows {
        for v in [&row[4], &row[7], &row[10], &row[13]] {
            assert!(v == "pass" || v == "fail", "{v}");
        }
    }
}

#[test]
fn same_name_runs_stay_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    run(&small_ensemble("same"), &a, None).unwrap();
    let s = report(&[&a, &a], &tmp.path().join("rep")).unwrap();
    assert_eq!(s.divergence_columns.len(), 4);
}
