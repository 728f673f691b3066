use std::path::Path;

use renormlab_cli::{CliError, RunConfig};

fn example() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../renormlab.toml");
    RunConfig::load(&path).unwrap()
}

#[test]
fn example_file_lists_the_defaults() {
    assert_eq!(example(), RunConfig::default());
    RunConfig::default().validate().unwrap();
}

#[test]
fn toml_roundtrip() {
    let text = toml::to_string(&RunConfig::default()).unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig::default());
}

#[test]
fn partial_files_keep_defaults() {
    let cfg = RunConfig::from_toml("seed = 3\n[cantor]\ndepth = 8\n").unwrap();
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.cantor.depth, 8);
    assert_eq!(cfg.tower, RunConfig::default().tower);
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(matches!(RunConfig::from_toml("sed = 3\n"), Err(CliError::ConfigInvalid(_))));
    assert!(matches!(RunConfig::from_toml("[cantor]\ndeep = 3\n"), Err(CliError::ConfigInvalid(_))));
}

#[test]
fn validation() {
    let mut c = RunConfig::default();
    c.rigidity.t = 0.06;
    assert!(matches!(c.validate(), Err(CliError::ConfigInvalid(_))));
    let mut c = RunConfig::default();
    c.tower.depth = 0;
    assert!(c.validate().is_err());
    let mut c = RunConfig::default();
    c.family.a_min = -1.0;
    assert!(c.validate().is_err());
    let mut c = RunConfig::default();
    c.rigidity.seeded_n = 3;
    assert!(c.validate().is_err());
}

#[test]
fn distortion_seed_defaults_to_run_seed() {
    let mut c = RunConfig::default();
    assert_eq!(c.distortion_seed(), c.seed);
    c.distortion.seed = Some(99);
    assert_eq!(c.distortion_seed(), 99);
}
