use std::collections::BTreeMap;
use std::path::Path;

use ed_sim::artifacts::{Manifest, LEDGER, MANIFEST, PARTIAL};
use ed_sim::config::{preset, ExperimentConfig};
use ed_sim::report::read_ledger;
use ed_sim::snapshot;
use ed_sim::{run, Outcome};

fn small_evolve() -> ExperimentConfig {
    let mut cfg = preset("free-1d").unwrap();
    let n = cfg.numerics.as_mut().unwrap();
    n.steps = 120;
    n.observe_every = 10;
    n.snapshot_every = 40;
    cfg
}

fn small_ensemble() -> ExperimentConfig {
    let mut cfg = preset("free-1d-ensemble").unwrap();
    cfg.name = "small-ensemble".into();
    cfg.grid.as_mut().unwrap().points = vec![256];
    cfg.numerics.as_mut().unwrap().steps = 60;
    let s = cfg.sampling.as_mut().unwrap();
    s.members = 4000;
    s.checkpoints = 3;
    s.calibration_draws = 40;
    cfg
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn evolve_writes_snapshots_observables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let cfg = small_evolve();
    let res = run(&cfg, &dir, Some(2)).unwrap();
    let Outcome::Evolve(rep) = &res.outcome else { panic!("wrong outcome") };
    assert_eq!(rep.steps, 120);
    assert!(rep.max_norm_error < 1e-10);
    assert_eq!(rep.observables.len(), 13);

    let steps: Vec<usize> = (0..=3).map(|i| 40 * i).collect();
    for &k in &steps {
        let path = dir.join(format!("snapshots/step_{k:06}.edsnap"));
        let (h, s) = snapshot::read(&path).unwrap();
        assert_eq!(h.step, k);
        assert!((h.time - 0.005 * k as f64).abs() < 1e-12);
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }
    let obs = std::fs::read_to_string(dir.join("observables.csv")).unwrap();
    let mut lines = obs.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "time,norm,energy,mean_x0,width_x0,r_rho,r_phi");
    assert_eq!(lines.count(), 13);

    assert!(!dir.join(PARTIAL).exists());
    let m = Manifest::read(&dir).unwrap();
    assert_eq!(m, res.manifest);
    assert_eq!(m.config_hash, cfg.clone().resolve_seed(None).unwrap().hash().unwrap());
    assert!(m.artifacts.iter().any(|a| a.path == LEDGER));
    let on_disk = files(&dir);
    for a in &m.artifacts {
        let bytes = &on_disk[&a.path];
        assert_eq!(a.bytes as usize, bytes.len(), "{}", a.path);
    }
}

#[test]
fn every_artifact_carries_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, cfg) in [small_evolve(), small_ensemble(), preset("entropic-step").unwrap()].into_iter().enumerate() {
        let dir = tmp.path().join(i.to_string());
        let hash = run(&cfg, &dir, Some(2)).unwrap().manifest.config_hash;
        for (path, bytes) in files(&dir) {
            if path.ends_with(".edsnap") {
                let (h, _) = snapshot::decode(&bytes).unwrap();
                assert_eq!(h.config_hash, hash);
                continue;
            }
            let text = String::from_utf8(bytes).unwrap();
            if path.ends_with(".csv") {
                assert_eq!(text.lines().next().unwrap(), format!("# config_hash={hash}"), "{path}");
            } else if path.ends_with(".json") {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert_eq!(v["config_hash"], hash.as_str(), "{path}");
            } else if path == LEDGER {
                for row in read_ledger(&dir).unwrap() {
                    assert_eq!(row.config_hash, hash);
                }
            } else {
                panic!("unexpected artifact {path}");
            }
        }
    }
}

#[test]
fn ensemble_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_ensemble();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&cfg, &a, Some(1)).unwrap();
    run(&cfg, &b, Some(4)).unwrap();
    let fa = files(&a);
    assert!(fa.contains_key("ensemble_summary.csv") && fa.contains_key("histograms.csv"));
    assert_eq!(fa, files(&b));
}

#[test]
fn changing_the_seed_changes_the_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_ensemble();
    run(&cfg.clone().resolve_seed(Some(1)).unwrap(), &tmp.path().join("a"), None).unwrap();
    run(&cfg.resolve_seed(Some(2)).unwrap(), &tmp.path().join("b"), None).unwrap();
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("histograms.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn ensemble_summary_lists_every_process_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&small_ensemble(), tmp.path(), None).unwrap();
    let Outcome::Ensemble(rep) = res.outcome else { panic!() };
    assert_eq!(rep.processes.len(), 2);
    for p in &rep.processes {
        assert_eq!(p.checkpoints.len(), 3);
        assert_eq!(p.members, 4000);
        let steps: Vec<usize> = p.checkpoints.iter().map(|c| c.step).collect();
        assert_eq!(steps, vec![20, 40, 60]);
    }
    let text = std::fs::read_to_string(tmp.path().join("ensemble_summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 6);
}

#[test]
fn failed_run_leaves_the_partial_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let cfg = ExperimentConfig::report(vec![tmp.path().join("missing").display().to_string()]);
    assert!(run(&cfg, &dir, None).is_err());
    let marker = std::fs::read_to_string(dir.join(PARTIAL)).unwrap();
    assert!(marker.starts_with("run failed:"), "{marker}");
    assert!(!dir.join(MANIFEST).exists());
}

#[test]
fn rerun_into_the_same_directory_replaces_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_evolve();
    let first = run(&cfg, tmp.path(), None).unwrap().manifest;
    let second = run(&cfg, tmp.path(), None).unwrap().manifest;
    assert_eq!(first, second);
}

#[test]
fn invalid_configs_fail_before_touching_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("never");
    let mut cfg = small_evolve();
    cfg.numerics.as_mut().unwrap().dt = -1.0;
    assert!(run(&cfg, &dir, None).is_err());
    assert!(!dir.exists());
    assert!(run(&small_evolve(), &dir, Some(0)).is_err());
}
