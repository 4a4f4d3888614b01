#![allow(dead_code)]

use std::path::PathBuf;

use grcc::case::{load_case, PowerCase};
use grcc::config::{load_config, StudyConfig};

/// (name, case file) of every bundled fixture, smallest first.
pub const FIXTURES: [(&str, &str); 4] = [
    ("case3", "case3.toml"),
    ("case5", "case5.m"),
    ("case14", "case14.m"),
    ("case118", "case118.m"),
];

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn case_path(name: &str) -> PathBuf {
    let file = FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| *f)
        .unwrap_or_else(|| panic!("no fixture {name}"));
    fixture_dir().join(file)
}

pub fn config_path(name: &str) -> PathBuf {
    fixture_dir().join(format!("{name}.study.toml"))
}

pub fn load(name: &str) -> (PowerCase, StudyConfig) {
    let case = load_case(case_path(name)).unwrap();
    let cfg = load_config(config_path(name), &case).unwrap();
    (case, cfg)
}
