#![allow(dead_code)]

use std::path::PathBuf;

use stringnet::scenario::Scenario;

pub fn reference_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/reference.json")
}

pub fn reference() -> Scenario {
    Scenario::load(&reference_path()).expect("reference scenario loads")
}

pub fn reference_value() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(reference_path()).unwrap()).unwrap()
}
