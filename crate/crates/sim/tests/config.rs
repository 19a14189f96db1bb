use ed_sim::config::{preset, ExperimentConfig, Kind, PRESETS, SCHEMA_VERSION};
use ed_sim::SimError;

fn field_of(err: SimError) -> String {
    match err {
        SimError::Config { field, .. } => field,
        other => panic!("expected a field diagnostic, got {other}"),
    }
}

const MINIMAL: &str = r#"
schema = 1
name = "tiny"
kind = "evolve"

[grid]
points = [64]
lower = [-5.0]
upper = [5.0]
periodic = [false]

[system]
masses = [1.0]
spatial_dim = 1

[potential]
preset = "harmonic"
omega = 1.0
center = [0.0]

[initial]
state = "gaussian"
center = [0.5]
sigma = [0.7]
k = [0.0]

[numerics]
dt = 0.01
steps = 10
"#;

#[test]
fn every_preset_round_trips_through_canonical_text() {
    for name in PRESETS {
        let cfg = preset(name).unwrap().resolve_seed(None).unwrap();
        let text = cfg.canonical().unwrap();
        let again = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(again, cfg, "{name}");
        assert_eq!(again.canonical().unwrap(), text, "{name}");
        assert_eq!(again.hash().unwrap(), cfg.hash().unwrap());
    }
}

#[test]
fn defaults_are_filled_and_written_out() {
    let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
    let text = cfg.canonical().unwrap();
    assert!(text.contains("hbar = 1.0"));
    assert!(text.contains("gamma = 3.0"));
    assert!(text.contains("observe_every = 1"));
    assert_eq!(cfg.kind, Kind::Evolve);
}

#[test]
fn seed_is_derived_from_the_config_when_absent() {
    let a = ExperimentConfig::parse(MINIMAL).unwrap().resolve_seed(None).unwrap();
    let b = ExperimentConfig::parse(MINIMAL).unwrap().resolve_seed(None).unwrap();
    assert_eq!(a.seed, b.seed);
    let other = ExperimentConfig::parse(&MINIMAL.replace("steps = 10", "steps = 11"))
        .unwrap()
        .resolve_seed(None)
        .unwrap();
    assert_ne!(a.seed, other.seed);
}

#[test]
fn explicit_and_override_seeds() {
    let text = MINIMAL.replace("kind = \"evolve\"", "kind = \"evolve\"\nseed = 42");
    let cfg = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(cfg.clone().resolve_seed(None).unwrap().seed, Some(42));
    let over = cfg.clone().resolve_seed(Some(7)).unwrap();
    assert_eq!(over.seed, Some(7));
    // the seed is part of the hashed text
    assert_ne!(over.hash().unwrap(), cfg.hash().unwrap());
}

#[test]
fn unknown_keys_are_rejected() {
    let text = MINIMAL.replace("steps = 10", "steps = 10\nstpes = 3");
    let err = ExperimentConfig::parse(&text).unwrap_err();
    assert!(matches!(err, SimError::Parse(_)), "{err}");
    assert!(err.to_string().contains("stpes"), "{err}");
}

#[test]
fn missing_section_names_the_section() {
    let text = MINIMAL.replace("[numerics]\ndt = 0.01\nsteps = 10\n", "");
    assert_eq!(field_of(ExperimentConfig::parse(&text).unwrap_err()), "numerics");
}

#[test]
fn field_diagnostics() {
    let cases = [
        ("schema = 1", &format!("schema = {}", SCHEMA_VERSION + 1) as &str, "schema"),
        ("dt = 0.01", "dt = 0.0", "numerics.dt"),
        ("steps = 10", "steps = 0", "numerics.steps"),
        ("upper = [5.0]", "upper = [-6.0]", "grid.upper[0]"),
        ("periodic = [false]", "periodic = [false, true]", "grid"),
        ("spatial_dim = 1", "spatial_dim = 2", "system.spatial_dim"),
        ("masses = [1.0]", "masses = [1.0]\ncharges = [1.0, 2.0]", "system.charges"),
    ];
    for (from, to, expect) in cases {
        let text = MINIMAL.replace(from, to);
        assert_eq!(field_of(ExperimentConfig::parse(&text).unwrap_err()), expect, "{to}");
    }
}

#[test]
fn unresolved_entropic_kernel_is_a_config_error() {
    let mut cfg = preset("entropic-step").unwrap();
    cfg.entropic.as_mut().unwrap().dt = 0.01;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "entropic.dt");
}

#[test]
fn unknown_preset() {
    assert!(matches!(preset("nope"), Err(SimError::UnknownPreset(_))));
}

#[test]
fn from_file_reports_the_path() {
    let err = ExperimentConfig::from_file(std::path::Path::new("/nonexistent/x.toml")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/x.toml"));
}
