//! Data and attack models: pmfs over the quantizer alphabet, the network
//! scenario, and the attack description.
//!
//! Symbol convention for Gaussian quantizers: symbol `o` is emitted when the
//! measurement falls in `(t_{o-1}, t_o]`, so with a single threshold symbol 0
//! means "at or below the threshold".

use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, normal_pdf};
use std::collections::BTreeSet;
use std::fmt::Debug;

/// Tolerance on `sum(probs) == 1`.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Tolerance on each partial-derivative column summing to zero.
pub const PARTIAL_SUM_TOL: f64 = 1e-10;
/// Probabilities below this trigger a warning; they make likelihood ratios fragile.
pub const SMALL_PROB_WARN: f64 = 1e-12;

/// A pmf over the alphabet `{0, .., |O|-1}` with optional partials in theta and xi.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphabetPmf {
    probs: Vec<f64>,
    dtheta: Option<Vec<f64>>,
    /// `dxi[o][k] = d p_o / d xi_k`
    dxi: Option<Vec<Vec<f64>>>,
}

impl AlphabetPmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "alphabet must have at least 2 symbols, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            probs,
            dtheta: None,
            dxi: None,
        })
    }

    pub fn with_dtheta(mut self, dtheta: Vec<f64>) -> Result<Self> {
        if dtheta.len() != self.probs.len() {
            return Err(Error::InvalidParameter(format!(
                "dtheta has {} entries for an alphabet of {}",
                dtheta.len(),
                self.probs.len()
            )));
        }
        check_zero_sum(&dtheta, "dtheta")?;
        self.dtheta = Some(dtheta);
        Ok(self)
    }

    /// `dxi` is indexed `[symbol][component]`.
    pub fn with_dxi(mut self, dxi: Vec<Vec<f64>>) -> Result<Self> {
        if dxi.len() != self.probs.len() {
            return Err(Error::InvalidParameter(format!(
                "dxi has {} rows for an alphabet of {}",
                dxi.len(),
                self.probs.len()
            )));
        }
        let d = dxi[0].len();
        if d == 0 || dxi.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter(
                "dxi rows must share a nonzero length".into(),
            ));
        }
        for k in 0..d {
            let col: Vec<f64> = dxi.iter().map(|row| row[k]).collect();
            check_zero_sum(&col, &format!("dxi column {k}"))?;
        }
        self.dxi = Some(dxi);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dtheta(&self) -> Option<&[f64]> {
        self.dtheta.as_deref()
    }

    pub fn dxi(&self) -> Option<&[Vec<f64>]> {
        self.dxi.as_deref()
    }

    pub fn xi_dim(&self) -> Option<usize> {
        self.dxi.as_ref().map(|m| m[0].len())
    }

    pub fn require_dtheta(&self, what: &str) -> Result<&[f64]> {
        self.dtheta()
            .ok_or_else(|| Error::PartialsUnavailable(format!("{what}: no dtheta")))
    }

    pub fn require_dxi(&self, what: &str) -> Result<&[Vec<f64>]> {
        self.dxi()
            .ok_or_else(|| Error::PartialsUnavailable(format!("{what}: no dxi")))
    }

    /// Per-symbol Fisher information in theta: `sum_o (dp_o)^2 / p_o`, with 0/0 := 0.
    pub fn fisher_information(&self) -> Result<f64> {
        let dtheta = self.require_dtheta("fisher information")?;
        Ok(self
            .probs
            .iter()
            .zip(dtheta)
            .map(|(&p, &dp)| if p > 0.0 { dp * dp / p } else { 0.0 })
            .sum())
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn check_zero_sum(col: &[f64], what: &str) -> Result<()> {
    let s: f64 = col.iter().sum();
    if s.abs() > PARTIAL_SUM_TOL {
        return Err(Error::InvalidParameter(format!(
            "{what} sums to {s}, expected 0"
        )));
    }
    Ok(())
}

/// A pmf-valued function of `(theta, xi)`.
pub trait PmfFamily: Send + Sync + Debug {
    fn alphabet_size(&self) -> usize;

    /// Dimension of the attack parameter; 0 for families that ignore xi.
    fn xi_dim(&self) -> usize;

    fn evaluate(&self, theta: f64, xi: &[f64]) -> Result<AlphabetPmf>;
}

/// Gaussian measurement `x = mean + n`, `n ~ N(0, std^2)`, quantized by
/// strictly increasing thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianQuantizer {
    thresholds: Vec<f64>,
    noise_std: f64,
}

impl GaussianQuantizer {
    pub fn new(thresholds: Vec<f64>, noise_std: f64) -> Result<Self> {
        if !(noise_std > 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_std must be positive, got {noise_std}"
            )));
        }
        if thresholds.is_empty() {
            return Err(Error::InvalidParameter("need at least one threshold".into()));
        }
        if thresholds.iter().any(|t| !t.is_finite())
            || thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "thresholds must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self {
            thresholds,
            noise_std,
        })
    }

    pub fn one_bit(threshold: f64, noise_std: f64) -> Result<Self> {
        Self::new(vec![threshold], noise_std)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Cell probabilities and their derivatives with respect to the mean and
    /// the noise standard deviation.
    fn cells(&self, mean: f64, std: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.thresholds.len();
        let z: Vec<f64> = self.thresholds.iter().map(|t| (t - mean) / std).collect();
        let pdf: Vec<f64> = z.iter().map(|&z| normal_pdf(z)).collect();
        let mut probs = Vec::with_capacity(m + 1);
        let mut dmean = Vec::with_capacity(m + 1);
        let mut dstd = Vec::with_capacity(m + 1);
        for o in 0..=m {
            let (z_hi, f_hi, zf_hi) = if o < m {
                (z[o], pdf[o], pdf[o] * z[o])
            } else {
                (f64::INFINITY, 0.0, 0.0)
            };
            let (z_lo, f_lo, zf_lo) = if o > 0 {
                (z[o - 1], pdf[o - 1], pdf[o - 1] * z[o - 1])
            } else {
                (f64::NEG_INFINITY, 0.0, 0.0)
            };
            // upper-tail cells via the complementary CDF to keep tiny masses
            probs.push(if z_lo > 0.0 {
                normal_cdf(-z_lo) - normal_cdf(-z_hi)
            } else {
                normal_cdf(z_hi) - normal_cdf(z_lo)
            });
            dmean.push(-(f_hi - f_lo) / std);
            dstd.push(-(zf_hi - zf_lo) / std);
        }
        (probs, dmean, dstd)
    }

    pub fn pmf_at(&self, mean: f64) -> Result<AlphabetPmf> {
        let (probs, dmean, _) = self.cells(mean, self.noise_std);
        AlphabetPmf::new(probs)?.with_dtheta(dmean)
    }
}

impl PmfFamily for GaussianQuantizer {
    fn alphabet_size(&self) -> usize {
        self.thresholds.len() + 1
    }

    fn xi_dim(&self) -> usize {
        0
    }

    fn evaluate(&self, theta: f64, _xi: &[f64]) -> Result<AlphabetPmf> {
        self.pmf_at(theta)
    }
}

/// Data-injection attack: falsified measurement `theta + xi + n`, quantized
/// by the given quantizer. One attack parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionAttack {
    quantizer: GaussianQuantizer,
}

impl InjectionAttack {
    pub fn new(quantizer: GaussianQuantizer) -> Self {
        Self { quantizer }
    }

    pub fn quantizer(&self) -> &GaussianQuantizer {
        &self.quantizer
    }
}

impl PmfFamily for InjectionAttack {
    fn alphabet_size(&self) -> usize {
        self.quantizer.alphabet_size()
    }

    fn xi_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, theta: f64, xi: &[f64]) -> Result<AlphabetPmf> {
        if xi.len() != 1 {
            return Err(Error::UnsupportedDimension(xi.len()));
        }
        let (probs, dmean, _) = self.quantizer.cells(theta + xi[0], self.quantizer.noise_std);
        let dxi = dmean.iter().map(|&d| vec![d]).collect();
        AlphabetPmf::new(probs)?.with_dtheta(dmean)?.with_dxi(dxi)
    }
}

/// Injection plus noise amplification: falsified measurement
/// `theta + xi_0 + exp(xi_1) * n`. Two attack parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftScaleAttack {
    quantizer: GaussianQuantizer,
}

impl ShiftScaleAttack {
    pub fn new(quantizer: GaussianQuantizer) -> Self {
        Self { quantizer }
    }
}

impl PmfFamily for ShiftScaleAttack {
    fn alphabet_size(&self) -> usize {
        self.quantizer.alphabet_size()
    }

    fn xi_dim(&self) -> usize {
        2
    }

    fn evaluate(&self, theta: f64, xi: &[f64]) -> Result<AlphabetPmf> {
        if xi.len() != 2 {
            return Err(Error::UnsupportedDimension(xi.len()));
        }
        let std = self.quantizer.noise_std * xi[1].exp();
        let (probs, dmean, dstd) = self.quantizer.cells(theta + xi[0], std);
        let dxi = dmean
            .iter()
            .zip(&dstd)
            .map(|(&dm, &ds)| vec![dm, ds * std])
            .collect();
        AlphabetPmf::new(probs)?.with_dtheta(dmean)?.with_dxi(dxi)
    }
}

/// A family that ignores its arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPmf {
    pmf: AlphabetPmf,
    xi_dim: usize,
}

impl FixedPmf {
    pub fn new(pmf: AlphabetPmf, xi_dim: usize) -> Self {
        Self { pmf, xi_dim }
    }
}

impl PmfFamily for FixedPmf {
    fn alphabet_size(&self) -> usize {
        self.pmf.len()
    }

    fn xi_dim(&self) -> usize {
        self.xi_dim
    }

    fn evaluate(&self, _theta: f64, _xi: &[f64]) -> Result<AlphabetPmf> {
        Ok(self.pmf.clone())
    }
}

/// One-bit Gaussian quantizer pmf with analytic `dtheta`.
pub fn gaussian_quantizer_pmf(theta: f64, threshold: f64, noise_std: f64) -> Result<AlphabetPmf> {
    GaussianQuantizer::one_bit(threshold, noise_std)?.pmf_at(theta)
}

/// One-bit quantizer applied to an injected measurement `theta + xi + n`.
pub fn injection_attack_pmf(
    theta: f64,
    xi: &[f64],
    threshold: f64,
    noise_std: f64,
) -> Result<AlphabetPmf> {
    InjectionAttack::new(GaussianQuantizer::one_bit(threshold, noise_std)?).evaluate(theta, xi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdPartials {
    pub dtheta: Vec<f64>,
    /// `[symbol][component]`, empty rows when the family has no xi.
    pub dxi: Vec<Vec<f64>>,
}

/// Central-difference partials of a family. Each column is re-centred so it
/// sums to exactly zero; the correction is at rounding level.
pub fn finite_difference_partials(
    family: &dyn PmfFamily,
    theta: f64,
    xi: &[f64],
    step: f64,
) -> Result<FdPartials> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let n = family.alphabet_size();
    let diff = |plus: AlphabetPmf, minus: AlphabetPmf| -> Vec<f64> {
        let mut col: Vec<f64> = plus
            .probs()
            .iter()
            .zip(minus.probs())
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        col.iter_mut().for_each(|c| *c -= mean);
        col
    };
    let dtheta = diff(
        family.evaluate(theta + step, xi)?,
        family.evaluate(theta - step, xi)?,
    );
    let mut dxi = vec![Vec::with_capacity(xi.len()); n];
    let mut shifted = xi.to_vec();
    for k in 0..xi.len() {
        shifted[k] = xi[k] + step;
        let plus = family.evaluate(theta, &shifted)?;
        shifted[k] = xi[k] - step;
        let minus = family.evaluate(theta, &shifted)?;
        shifted[k] = xi[k];
        for (row, v) in dxi.iter_mut().zip(diff(plus, minus)) {
            row.push(v);
        }
    }
    Ok(FdPartials { dtheta, dxi })
}

/// Network geometry. Device indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_devices: usize,
    pub honest: Vec<usize>,
    pub malicious: Vec<usize>,
    /// Chain length `L` at which estimation happens.
    pub chain_length: usize,
    /// Authentic-branch length `L0` when the devices are hijacked.
    pub authentic_length: usize,
    pub alphabet_size: usize,
    pub theta: f64,
}

impl Scenario {
    /// Builds a scenario whose honest set is the complement of `malicious`.
    pub fn with_malicious(
        n_devices: usize,
        malicious: &[usize],
        chain_length: usize,
        authentic_length: usize,
        alphabet_size: usize,
        theta: f64,
    ) -> Self {
        let bad: BTreeSet<usize> = malicious.iter().copied().collect();
        Self {
            n_devices,
            honest: (0..n_devices).filter(|j| !bad.contains(j)).collect(),
            malicious: bad.into_iter().collect(),
            chain_length,
            authentic_length,
            alphabet_size,
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let honest: BTreeSet<usize> = self.honest.iter().copied().collect();
        let malicious: BTreeSet<usize> = self.malicious.iter().copied().collect();
        if honest.len() != self.honest.len() || malicious.len() != self.malicious.len() {
            return Err(Error::InvalidPartition("duplicate device index".into()));
        }
        if let Some(j) = honest.intersection(&malicious).next() {
            return Err(Error::InvalidPartition(format!(
                "device {j} is both honest and malicious"
            )));
        }
        let all: BTreeSet<usize> = honest.union(&malicious).copied().collect();
        if all != (0..self.n_devices).collect::<BTreeSet<_>>() {
            return Err(Error::InvalidPartition(format!(
                "honest and malicious sets must cover devices 0..{}",
                self.n_devices
            )));
        }
        if self.honest.is_empty() {
            return Err(Error::DegenerateScenario(
                "no honest devices: the bound 1/J_C0 is infinite".into(),
            ));
        }
        if self.authentic_length < 1 || self.authentic_length > self.chain_length {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= L0 <= L, got L0 = {}, L = {}",
                self.authentic_length, self.chain_length
            )));
        }
        if self.alphabet_size < 2 {
            return Err(Error::InvalidParameter("alphabet size must be >= 2".into()));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        Ok(())
    }

    /// Number of symbols in the stored chain, `N * L`.
    pub fn coordinates(&self) -> usize {
        self.n_devices * self.chain_length
    }

    pub fn is_malicious(&self, device: usize) -> bool {
        self.malicious.contains(&device)
    }
}

/// Attack description: fork point, attack parameters, DSA success probability
/// and the realized malicious-data pmf.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    /// `L_a`, one-based block index where the counterfeit branch forks.
    pub fork_point: usize,
    pub xi: Vec<f64>,
    pub dsa_prob: f64,
    pub attack_pmf: AlphabetPmf,
}

impl AttackSpec {
    pub fn validate_against(&self, scenario: &Scenario) -> Result<()> {
        if self.fork_point < 1 || self.fork_point > scenario.authentic_length {
            return Err(Error::InvalidFork {
                fork_point: self.fork_point,
                authentic_length: scenario.authentic_length,
            });
        }
        if !(0.0..=1.0).contains(&self.dsa_prob) {
            return Err(Error::InvalidParameter(format!(
                "DSA probability {} outside [0, 1]",
                self.dsa_prob
            )));
        }
        if self.xi.is_empty() {
            return Err(Error::InvalidParameter("xi must have dimension >= 1".into()));
        }
        if self.attack_pmf.len() != scenario.alphabet_size {
            return Err(Error::InvalidParameter(format!(
                "attack pmf has {} symbols, scenario alphabet has {}",
                self.attack_pmf.len(),
                scenario.alphabet_size
            )));
        }
        if let Some(d) = self.attack_pmf.xi_dim() {
            if d != self.xi.len() {
                return Err(Error::InvalidParameter(format!(
                    "attack pmf has {d} xi partials, xi has dimension {}",
                    self.xi.len()
                )));
            }
        }
        Ok(())
    }
}

/// Validates the pair and hands it back unchanged.
pub fn validate_scenario(scenario: Scenario, attack: AttackSpec) -> Result<(Scenario, AttackSpec)> {
    scenario.validate()?;
    attack.validate_against(&scenario)?;
    if attack.attack_pmf.min_prob() < SMALL_PROB_WARN {
        log::warn!(
            "attack pmf has a probability below {SMALL_PROB_WARN:e}; likelihood ratios may be unstable"
        );
    }
    Ok((scenario, attack))
}

/// Checks the honest pmf against the scenario alphabet.
pub fn check_honest_pmf(scenario: &Scenario, p: &AlphabetPmf) -> Result<()> {
    if p.len() != scenario.alphabet_size {
        return Err(Error::InvalidParameter(format!(
            "honest pmf has {} symbols, scenario alphabet has {}",
            p.len(),
            scenario.alphabet_size
        )));
    }
    if p.min_prob() < SMALL_PROB_WARN {
        log::warn!("honest pmf has a probability below {SMALL_PROB_WARN:e}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI0: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn symmetric_one_bit_quantizer() {
        let p = gaussian_quantizer_pmf(0.0, 0.0, 1.0).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
        let d = p.dtheta().unwrap();
        assert!((d[0] + PHI0).abs() < 1e-15);
        assert!((d[1] - PHI0).abs() < 1e-15);

        let p = gaussian_quantizer_pmf(2.0, 2.0, 1.0).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn reference_honest_pmf_is_reproduced_by_threshold_point_one() {
        let p = gaussian_quantizer_pmf(2.0, 0.1, 1.0).unwrap();
        assert!((p.probs()[0] - 0.028_716_56).abs() < 1e-5);
        assert!((p.probs()[0] - 0.028_716_559_816_001_805).abs() < 1e-15);
        assert!((p.probs()[1] - 0.971_283_44).abs() < 1e-5);
    }

    #[test]
    fn non_positive_noise_rejected() {
        assert!(matches!(
            gaussian_quantizer_pmf(0.0, 0.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            injection_attack_pmf(0.0, &[1.0], 0.0, -1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn injection_examples() {
        let tau = 0.7;
        let a = injection_attack_pmf(2.0, &[0.0], tau, 1.0).unwrap();
        let b = gaussian_quantizer_pmf(2.0, tau, 1.0).unwrap();
        assert_eq!(a.probs(), b.probs());
        assert_eq!(a.dtheta(), b.dtheta());

        let p = injection_attack_pmf(0.0, &[2.5], 0.0, 1.0).unwrap();
        assert!((p.probs()[0] - 0.006_209_665_325_776_135).abs() < 1e-15);
        assert!((p.probs()[1] - 0.993_790_334_674_223_9).abs() < 1e-15);

        let p = injection_attack_pmf(2.0, &[2.5], 0.1, 1.0).unwrap();
        let dxi: Vec<f64> = p.dxi().unwrap().iter().map(|r| r[0]).collect();
        assert_eq!(p.dtheta().unwrap(), dxi.as_slice());
    }

    #[test]
    fn injection_rejects_wrong_dimension() {
        assert!(matches!(
            injection_attack_pmf(0.0, &[1.0, 2.0], 0.0, 1.0),
            Err(Error::UnsupportedDimension(2))
        ));
    }

    #[test]
    fn fd_partials_match_analytic() {
        let q = GaussianQuantizer::one_bit(0.0, 1.0).unwrap();
        let fd = finite_difference_partials(&q, 0.0, &[], 1e-5).unwrap();
        assert!((fd.dtheta[0] + PHI0).abs() < 1e-8);
        assert!((fd.dtheta[1] - PHI0).abs() < 1e-8);

        let fam = InjectionAttack::new(GaussianQuantizer::one_bit(0.3, 1.2).unwrap());
        let fd = finite_difference_partials(&fam, 1.0, &[0.4], 1e-5).unwrap();
        let exact = fam.evaluate(1.0, &[0.4]).unwrap();
        for (row, ex) in fd.dxi.iter().zip(exact.dxi().unwrap()) {
            assert!((row[0] - ex[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn fd_partials_of_constant_family_vanish() {
        let fam = FixedPmf::new(AlphabetPmf::new(vec![0.3, 0.7]).unwrap(), 1);
        let fd = finite_difference_partials(&fam, 0.0, &[1.0], 1e-4).unwrap();
        assert_eq!(fd.dtheta, vec![0.0, 0.0]);
        assert_eq!(fd.dxi, vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn multilevel_and_shift_scale_partials() {
        let q = GaussianQuantizer::new(vec![-0.5, 0.4, 1.1], 0.8).unwrap();
        let fam = ShiftScaleAttack::new(q.clone());
        let (theta, xi) = (0.2, [0.3, -0.2]);
        let exact = fam.evaluate(theta, &xi).unwrap();
        assert!((exact.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for step in [1e-6, 1e-5, 1e-4] {
            let fd = finite_difference_partials(&fam, theta, &xi, step).unwrap();
            for o in 0..4 {
                let a = exact.dtheta().unwrap()[o];
                assert!((fd.dtheta[o] - a).abs() <= 1e-6 * a.abs().max(1e-3));
                for k in 0..2 {
                    let a = exact.dxi().unwrap()[o][k];
                    assert!((fd.dxi[o][k] - a).abs() <= 1e-6 * a.abs().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn pmf_invariants_enforced() {
        assert!(AlphabetPmf::new(vec![0.5, 0.6]).is_err());
        assert!(AlphabetPmf::new(vec![1.2, -0.2]).is_err());
        assert!(AlphabetPmf::new(vec![1.0]).is_err());
        let p = AlphabetPmf::new(vec![0.5, 0.5]).unwrap();
        assert!(p.clone().with_dtheta(vec![0.1, 0.1]).is_err());
        assert!(p.with_dxi(vec![vec![0.1], vec![-0.1]]).is_ok());
    }

    fn attack(fork: usize) -> AttackSpec {
        AttackSpec {
            fork_point: fork,
            xi: vec![2.5],
            dsa_prob: 0.09,
            attack_pmf: AlphabetPmf::new(vec![0.066_807_2, 0.933_192_8]).unwrap(),
        }
    }

    #[test]
    fn validate_scenario_cases() {
        let s = Scenario::with_malicious(3, &[2], 5, 4, 2, 2.0);
        assert_eq!(s.honest, vec![0, 1]);
        assert!(validate_scenario(s.clone(), attack(2)).is_ok());

        let none_honest = Scenario::with_malicious(2, &[0, 1], 5, 4, 2, 2.0);
        assert!(matches!(
            validate_scenario(none_honest, attack(2)),
            Err(Error::DegenerateScenario(_))
        ));

        assert!(matches!(
            validate_scenario(s.clone(), attack(5)),
            Err(Error::InvalidFork { .. })
        ));

        let mut overlap = s.clone();
        overlap.honest = vec![0, 1, 2];
        assert!(matches!(
            validate_scenario(overlap, attack(2)),
            Err(Error::InvalidPartition(_))
        ));
    }
}
