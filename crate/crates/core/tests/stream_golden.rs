use std::fmt::Write;
use std::path::PathBuf;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rfflab::derive_stream;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stream_golden.txt")
}

/// 100 raw u64 draws, then 20 standard normals and 20 unit uniforms as f64
/// bit patterns, all from the stream of (2024, "golden", 3, 7).
fn render() -> String {
    let mut rng = derive_stream(2024, "golden", 3, 7).rng();
    let mut out = String::new();
    for _ in 0..100 {
        writeln!(out, "u64 {:016x}", rng.next_u64()).unwrap();
    }
    for _ in 0..20 {
        writeln!(out, "normal {:016x}", rng.sample::<f64, _>(StandardNormal).to_bits()).unwrap();
    }
    for _ in 0..20 {
        writeln!(out, "uniform {:016x}", rng.random::<f64>().to_bits()).unwrap();
    }
    out
}

#[test]
fn stream_matches_golden_file() {
    let want = std::fs::read_to_string(fixture()).expect("golden fixture present");
    assert_eq!(render(), want);
}

#[test]
#[ignore = "rewrites the golden fixture"]
fn regenerate_golden_file() {
    std::fs::write(fixture(), render()).unwrap();
}
