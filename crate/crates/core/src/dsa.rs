//! Double-spending race: probability that the counterfeit branch reaches the
//! trigger length before the authentic branch, under i.i.d. Bernoulli block
//! attribution.
//!
//! Tabulated success probabilities can always be passed straight to the
//! estimation code; this module is only a default generator.

use crate::error::{Error, Result};
use crate::model::Scenario;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::ops::{Add, Mul, Sub};

/// Number of independent RNG streams used by the Monte Carlo estimator.
pub const MC_PARTITIONS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceSpec {
    /// Probability that the next block is mined by the adversary.
    pub adversary_share: f64,
    /// Blocks the counterfeit branch still needs, `L - L_a + 1`.
    pub counterfeit_needed: usize,
    /// Blocks the authentic branch still needs, `L - L0`.
    pub honest_needed: usize,
}

impl RaceSpec {
    pub fn new(adversary_share: f64, counterfeit_needed: usize, honest_needed: usize) -> Result<Self> {
        let spec = Self {
            adversary_share,
            counterfeit_needed,
            honest_needed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Race triggered by a fork at `L_a` when the authentic chain has `L0`
    /// blocks and estimation happens at length `L`.
    pub fn for_fork(alpha: f64, chain_length: usize, authentic_length: usize, fork_point: usize) -> Result<Self> {
        if fork_point < 1 || fork_point > authentic_length {
            return Err(Error::InvalidFork {
                fork_point,
                authentic_length,
            });
        }
        if authentic_length > chain_length {
            return Err(Error::InvalidParameter(format!(
                "L0 = {authentic_length} exceeds L = {chain_length}"
            )));
        }
        Self::new(alpha, chain_length - fork_point + 1, chain_length - authentic_length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.adversary_share) {
            return Err(Error::InvalidParameter(format!(
                "adversary share {} outside [0, 1]",
                self.adversary_share
            )));
        }
        if self.counterfeit_needed < 1 {
            return Err(Error::InvalidParameter("counterfeit branch must need >= 1 block".into()));
        }
        Ok(())
    }
}

/// Probability that `c` adversary blocks arrive before `h` honest ones, in
/// any numeric type. `h = 0` gives zero: the authentic branch already reached
/// the trigger length.
pub fn race_probability_dp<T>(alpha: T, c: usize, h: usize) -> T
where
    T: Clone + Zero + One + Add<Output = T> + Sub<Output = T> + Mul<Output = T>,
{
    if h == 0 || c == 0 {
        return if c == 0 && h > 0 { T::one() } else { T::zero() };
    }
    let beta = T::one() - alpha.clone();
    // row[b]: probability of having seen `a` adversary and `b` honest blocks
    // with neither side finished, for the current `a`
    let mut row = vec![T::zero(); h];
    row[0] = T::one();
    for b in 1..h {
        row[b] = row[b - 1].clone() * beta.clone();
    }
    for _ in 1..c {
        let mut next = vec![T::zero(); h];
        next[0] = row[0].clone() * alpha.clone();
        for b in 1..h {
            next[b] = row[b].clone() * alpha.clone() + next[b - 1].clone() * beta.clone();
        }
        row = next;
    }
    row.into_iter()
        .fold(T::zero(), |acc, v| acc + v * alpha.clone())
}

pub fn race_probability_exact(spec: &RaceSpec) -> f64 {
    race_probability_dp(spec.adversary_share, spec.counterfeit_needed, spec.honest_needed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub trials: u64,
}

/// Monte Carlo estimate over `trials` simulated races. Each of the
/// [`MC_PARTITIONS`] partitions runs on its own ChaCha stream, so the result
/// depends only on `(seed, trials)`.
pub fn race_probability_mc(spec: &RaceSpec, trials: u64, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let wins: u64 = (0..MC_PARTITIONS)
        .into_par_iter()
        .map(|part| {
            let n = trials / MC_PARTITIONS + u64::from(part < trials % MC_PARTITIONS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(part);
            (0..n).filter(|_| simulate_race(spec, &mut rng)).count() as u64
        })
        .sum();
    let p = wins as f64 / trials as f64;
    Ok(McEstimate {
        estimate: p,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}

fn simulate_race(spec: &RaceSpec, rng: &mut impl Rng) -> bool {
    if spec.honest_needed == 0 {
        return false;
    }
    let (mut a, mut b) = (0, 0);
    loop {
        if rng.random::<f64>() < spec.adversary_share {
            a += 1;
            if a == spec.counterfeit_needed {
                return true;
            }
        } else {
            b += 1;
            if b == spec.honest_needed {
                return false;
            }
        }
    }
}

/// `P(L_a)` for `L_a = 1..=L0`.
pub fn success_profile(scenario: &Scenario, alpha: f64) -> Result<Vec<f64>> {
    profile(alpha, scenario.chain_length, scenario.authentic_length)
}

pub fn profile(alpha: f64, chain_length: usize, authentic_length: usize) -> Result<Vec<f64>> {
    (1..=authentic_length)
        .map(|la| RaceSpec::for_fork(alpha, chain_length, authentic_length, la).map(|s| race_probability_exact(&s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert_eq!(race_probability_exact(&RaceSpec::new(0.0, 2, 3).unwrap()), 0.0);
        let row = profile(0.3, 5, 4).unwrap();
        for (got, want) in row.iter().zip([0.00243, 0.0081, 0.027, 0.09]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let p = race_probability_exact(&RaceSpec::new(0.3, 3, 2).unwrap());
        assert!((p - 0.0837).abs() < 1e-15);
        assert_eq!(race_probability_exact(&RaceSpec::new(1.0, 1, 5).unwrap()), 1.0);
    }

    #[test]
    fn zero_honest_gap_is_zero() {
        assert_eq!(profile(0.4, 6, 6).unwrap(), vec![0.0; 6]);
        assert_eq!(profile(0.0, 7, 4).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn mc_edges() {
        let zero = race_probability_mc(&RaceSpec::new(0.0, 2, 3).unwrap(), 1000, 1).unwrap();
        assert_eq!((zero.estimate, zero.standard_error), (0.0, 0.0));
        let one = race_probability_mc(&RaceSpec::new(1.0, 1, 5).unwrap(), 1000, 1).unwrap();
        assert_eq!(one.estimate, 1.0);
    }

    #[test]
    fn mc_is_deterministic_and_close() {
        let spec = RaceSpec::new(0.3, 2, 1).unwrap();
        let a = race_probability_mc(&spec, 100_000, 9).unwrap();
        let b = race_probability_mc(&spec, 100_000, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.estimate - 0.09).abs() < 3.0 * a.standard_error);
    }

    #[test]
    fn invalid_specs() {
        assert!(RaceSpec::new(1.5, 1, 1).is_err());
        assert!(RaceSpec::new(0.5, 0, 1).is_err());
        assert!(RaceSpec::for_fork(0.3, 5, 4, 0).is_err());
        assert!(RaceSpec::for_fork(0.3, 3, 4, 1).is_err());
    }
}
