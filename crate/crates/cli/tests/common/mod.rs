#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hetpanel"));
    c.env_remove("HETPANEL_THREADS");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hetpanel")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("read json")).expect("parse json")
}

/// Validates `instance` against `schemas/<name>.schema.json`, returning the
/// error messages.
pub fn schema_errors(name: &str, instance: &serde_json::Value) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let schema = read_json(&path);
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(instance).map(|e| format!("{}: {e}", e.instance_path())).collect()
}

/// Writes a long CSV with the given unit series on periods 1..=T.
pub fn write_panel(path: &Path, series: &[(&str, Vec<f64>)]) {
    let mut s = String::from("unit,time,value\n");
    for (id, xs) in series {
        for (t, x) in xs.iter().enumerate() {
            s.push_str(&format!("{id},{},{x}\n", t + 1));
        }
    }
    std::fs::write(path, s).unwrap();
}
