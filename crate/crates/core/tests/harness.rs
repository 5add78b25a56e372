use proptest::prelude::*;
use roughpde::harness::{
    read_report, run, run_to_dir, verify_rerun, ExperimentConfig, ExperimentKind, FieldParams, Params,
    CONFIG_FILE, REPORT_FILE, TIMING_FILE,
};

fn small_field(seed: u64, modes: usize, dim: usize) -> ExperimentConfig {
    let mut config = ExperimentConfig::default_for(ExperimentKind::Field).with_seed(seed);
    config.params = Params::Field(FieldParams {
        modes,
        dim,
        cells: 4 * (modes + 1),
        times: vec![0.0, 0.01, 0.02],
        ..FieldParams::default()
    });
    config
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn configs_survive_a_toml_round_trip(seed in 0u64..i64::MAX as u64, modes in 1usize..100, dim in 1usize..4) {
        let config = small_field(seed, modes, dim);
        let text = config.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), config);
    }

    #[test]
    fn every_default_config_round_trips(kind in prop::sample::select(ExperimentKind::ALL.to_vec()), seed in 0u64..1000) {
        let config = ExperimentConfig::default_for(kind).with_seed(seed);
        let text = config.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), config);
    }
}

#[test]
fn omitted_keys_take_their_defaults() {
    let config = ExperimentConfig::from_toml_str("schema_version = 1\nkind = \"field\"\n").unwrap();
    assert_eq!(config, ExperimentConfig::default_for(ExperimentKind::Field));
}

#[test]
fn malformed_configs_are_rejected() {
    for text in [
        "kind = \"field\"",
        "schema_version = 2\nkind = \"field\"",
        "schema_version = 1\nkind = \"nope\"",
        "schema_version = 1\nkind = \"field\"\nbogus = 1",
        "schema_version = 1\nkind = \"field\"\n[params]\nmodes = -3",
        "schema_version = 1\nkind = \"field\"\n[params]\nunknown = 3",
        "schema_version = 1\nkind = \"field\"\nseed = -1",
    ] {
        assert!(ExperimentConfig::from_toml_str(text).is_err(), "accepted: {text}");
    }
}

#[test]
fn params_of_another_kind_are_rejected() {
    let mut config = small_field(1, 8, 1);
    config.kind = ExperimentKind::ExpMoment;
    assert!(run(&config).is_err());
}

#[test]
fn runs_persist_and_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let scratch = tempfile::tempdir().unwrap();
    let config = small_field(42, 16, 2);
    let report = run_to_dir(&config, dir.path()).unwrap();
    assert!(report.passed);
    for name in [CONFIG_FILE, REPORT_FILE, TIMING_FILE] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    for artifact in &report.artifacts {
        assert!(dir.path().join(&artifact.file).exists(), "{} missing", artifact.file);
    }
    assert_eq!(read_report(dir.path()).unwrap(), report);
    assert_eq!(ExperimentConfig::load(&dir.path().join(CONFIG_FILE)).unwrap(), config);
    assert!(verify_rerun(dir.path(), scratch.path()).unwrap().is_empty());
}

#[test]
fn a_different_seed_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let scratch = tempfile::tempdir().unwrap();
    run_to_dir(&small_field(1, 16, 1), dir.path()).unwrap();
    // tamper with the persisted seed: the rerun must now disagree
    small_field(2, 16, 1).save(&dir.path().join(CONFIG_FILE)).unwrap();
    let differing = verify_rerun(dir.path(), scratch.path()).unwrap();
    assert!(differing.iter().any(|f| f != CONFIG_FILE), "{differing:?}");
}
