//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's likelihood code.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::os::fd::FromRawFd;

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-bit quantizer pmf `[P(x < t), P(x >= t)]` for `x ~ N(mean, 1)`.
pub fn one_bit(mean: f64, threshold: f64) -> [f64; 2] {
    let lo = phi_cdf(threshold - mean);
    [lo, phi_cdf(mean - threshold)]
}

/// Brute-force geometry: which rows are hijacked, the fork point and the
/// success probability of the race.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub n: usize,
    pub l: usize,
    pub l0: usize,
    pub malicious: Vec<bool>,
    pub fork: usize,
    pub dsa: f64,
}

impl Geometry {
    /// Joint probability of the `n x l` symbol matrix `r` (row-major), with
    /// honest pmf `p` and attack pmf `q`.
    pub fn phi(&self, r: &[usize], p: &[f64], q: &[f64]) -> f64 {
        let mut honest = 1.0;
        let mut win = 1.0;
        let mut lose = 1.0;
        let mut any_bad = false;
        for j in 0..self.n {
            let row = &r[j * self.l..(j + 1) * self.l];
            if !self.malicious[j] {
                honest *= row.iter().map(|&s| p[s]).product::<f64>();
                continue;
            }
            any_bad = true;
            for (t, &s) in row.iter().enumerate() {
                if t + 1 < self.fork {
                    win *= p[s];
                    lose *= p[s];
                } else if t < self.l0 {
                    win *= q[s];
                    lose *= p[s];
                } else {
                    win *= q[s];
                    lose *= q[s];
                }
            }
        }
        if !any_bad {
            return honest;
        }
        honest * (self.dsa * win + (1.0 - self.dsa) * lose)
    }

    /// Every symbol matrix over an alphabet of size `k`.
    pub fn outcomes(&self, k: usize) -> Vec<Vec<usize>> {
        let cells = self.n * self.l;
        let total = k.pow(cells as u32);
        (0..total)
            .map(|mut i| {
                let mut v = vec![0; cells];
                for c in v.iter_mut() {
                    *c = i % k;
                    i /= k;
                }
                v
            })
            .collect()
    }
}

/// Random pmf on two symbols with both masses in `[lo, 1 - lo]`.
pub fn random_binary(rng: &mut ChaCha8Rng, lo: f64) -> Vec<f64> {
    let a = rng.random_range(lo..1.0 - lo);
    vec![a, 1.0 - a]
}

/// Random zero-sum derivative vector on two symbols.
pub fn random_partial(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = rng.random_range(-1.0..1.0);
    vec![d, -d]
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub fn report(id: u32, title: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let line = format!("criterion {id} [{tag}] {title}: {detail}\n");
    // fd 1 directly: the harness captures both print! and io::stdout()
    let mut raw = std::mem::ManuallyDrop::new(unsafe { std::fs::File::from_raw_fd(1) });
    let _ = raw.write_all(line.as_bytes());
}
