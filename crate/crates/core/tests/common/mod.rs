#![allow(dead_code)]

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use gibbs_spectral::measure::{random_target, TargetDistribution};

/// Coordinate sizes of suite member `i`: `d = 2 + i mod 3`, each size 2 or 3.
pub fn suite_dims(i: usize) -> Vec<usize> {
    let d = 2 + i % 3;
    (0..d).map(|j| 2 + ((i / 3) >> j & 1)).collect()
}

/// The 100 seeded random targets used across the acceptance checks.
pub fn suite() -> Vec<TargetDistribution> {
    (0..100)
        .map(|i| random_target(1000 + i as u64, &suite_dims(i), 1.0).expect("suite target"))
        .collect()
}

/// Writes one verdict line straight to stderr so it survives output capture.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[criterion {id:>2}] {verdict} {name}: {detail}");
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gibbs-spectral")
}

pub fn run_cli(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("GIBBS_SPECTRAL_OUT")
        .output()
        .expect("spawn CLI")
}

/// Sorted `(file name, bytes)` of every file in `dir`.
pub fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("read out dir")
        .map(|e| {
            let e = e.expect("dir entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("read file"))
        })
        .collect();
    files.sort();
    files
}
