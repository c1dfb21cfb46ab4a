#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const NOISE_SIGMA: f64 = 0.1;

pub fn four_tones(t: f64) -> f64 {
    5.0 * t.sin() + 3.0 * (2.0 * t).cos() - 2.3 * (5.0 * t).sin() + 1.2 * (7.0 * t).cos()
}

/// `f(t_s) + N(0, sigma^2)` on `n` samples spaced `d` apart from t = 0.
pub fn noisy_samples(n: usize, d: f64, sigma: f64, seed: u64, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|s| {
            let t = s as f64 * d;
            let eps = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (t, f(t) + eps)
        })
        .collect()
}

pub fn write_csv(path: &Path, rows: &[(f64, f64)]) {
    let mut text = String::from("time,value\n");
    for (t, v) in rows {
        let _ = writeln!(text, "{t},{v}");
    }
    std::fs::write(path, text).unwrap();
}

pub fn siabf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siabf"))
        .args(args)
        .output()
        .expect("failed to launch siabf")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn out_dir(root: &Path, name: &str) -> PathBuf {
    root.join(name)
}
