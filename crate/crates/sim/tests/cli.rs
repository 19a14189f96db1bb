use std::process::Command;

fn edsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edsim"))
}

#[test]
fn presets_are_listed() {
    let out = edsim().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ed_sim::config::PRESETS {
        assert!(text.contains(name));
    }
}

#[test]
fn show_config_is_parseable_and_honours_the_seed() {
    let out = edsim().args(["show-config", "-p", "harmonic", "--seed", "99"]).output().unwrap();
    assert!(out.status.success());
    let cfg = ed_sim::ExperimentConfig::parse(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, Some(99));
}

#[test]
fn run_from_a_config_file_under_the_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ed_sim::config::preset("harmonic").unwrap();
    cfg.numerics.as_mut().unwrap().steps = 20;
    let path = tmp.path().join("h.toml");
    std::fs::write(&path, cfg.canonical().unwrap()).unwrap();
    let out = edsim()
        .args(["evolve", "--config"])
        .arg(&path)
        .env("EDSIM_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("harmonic/manifest.json").exists());
}

#[test]
fn kind_mismatch_and_bad_input_exit_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = edsim()
        .args(["ensemble", "-p", "harmonic", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind"));
    let out = edsim().args(["evolve", "-p", "no-such"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = edsim().args(["evolve"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_of_a_missing_run_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = edsim()
        .arg("report")
        .arg(tmp.path().join("missing"))
        .arg("--out")
        .arg(tmp.path().join("rep"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(tmp.path().join("rep/PARTIAL").exists());
}
