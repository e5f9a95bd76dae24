//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

/// Run the binary in `dir` with `args`, capturing output.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condebias"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should run")
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

pub fn write(path: &Path, content: &str) {
    std::fs::write(path, content).expect("fixture write");
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}
