#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn exposlam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exposlam")).args(args).output().expect("spawn exposlam")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Two short sequences at the default resolution.
pub const SMALL: &str = r#"
methods = ["none", "global_gamma"]
[simulation]
frames = 12
[[sequences]]
name = "a"
kind = "straight"
[[sequences]]
name = "b"
kind = "spiral"
"#;

/// Writes `body` plus an `output` key into `dir/config.toml`.
pub fn config(dir: &Path, output: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    let text = format!("output = {:?}\n{body}", output.to_str().unwrap());
    fs::write(&path, text).unwrap();
    path
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = exposlam(args);
    assert!(out.status.success(), "{args:?} failed: {}", stderr(&out));
    out
}

/// Relative path → contents for every file under `root`.
pub fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn write_script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\nset -e\n{body}\n")).unwrap();
    format!("sh {}", path.display())
}
