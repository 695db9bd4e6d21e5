//! Small numerical helpers shared across modules.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `n! / prod(k_i!)` as a float. Exact for the sizes used here.
pub fn multinomial(counts: &[usize]) -> f64 {
    let mut total = 0usize;
    let mut out = 1.0f64;
    for &k in counts {
        for i in 1..=k {
            total += 1;
            out = out * total as f64 / i as f64;
        }
    }
    out
}

/// Calls `f` with every vector of `parts` nonnegative integers summing to `total`,
/// in lexicographic order.
pub fn for_each_composition(total: usize, parts: usize, mut f: impl FnMut(&[usize])) {
    let mut buf = vec![0usize; parts];
    fn rec(buf: &mut [usize], pos: usize, left: usize, f: &mut dyn FnMut(&[usize])) {
        if pos + 1 == buf.len() {
            buf[pos] = left;
            f(buf);
            return;
        }
        for k in 0..=left {
            buf[pos] = k;
            rec(buf, pos + 1, left - k, f);
        }
    }
    if parts == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    rec(&mut buf, 0, total, &mut f);
}

/// Relative closeness used for tie detection.
pub fn nearly_equal(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}
