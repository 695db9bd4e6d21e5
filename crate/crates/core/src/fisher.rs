//! Fisher information for `eta = [theta, xi]`, the Cramér–Rao bound on theta,
//! and the honest-data bound `1 / J_C0` that dominates it.
//!
//! Two evaluation paths produce the same [`FimBlocks`]:
//!
//! * [`FimPath::Enumerate`] sums over every outcome in `R`. This is the
//!   reference path; the psi vectors are materialized when `|R|` is at most
//!   [`PSI_MATERIALIZE_LIMIT`].
//! * [`FimPath::Factorized`] uses `sum_h phi_0(h) = 1` to drop the honest
//!   coordinates from the malicious-side sums, takes `J_C0 = |C0| L i(theta)`,
//!   and groups malicious patterns into sufficient-statistic classes. Its psi
//!   vectors are indexed by class (weighted by the square root of the class
//!   size), which preserves every Gram product.

use crate::classes::MaliciousClasses;
use crate::error::{Error, Result};
use crate::model::{check_honest_pmf, AlphabetPmf, AttackSpec, Scenario};
use crate::numeric::CompensatedSum;
use crate::outcome::{
    outcome_terms, require_all_partials, FactorTable, OutcomeSpace, OutcomeTerms, Segments,
    DEFAULT_OUTCOME_CAP,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest `|R|` for which the reference path keeps the psi vectors.
pub const PSI_MATERIALIZE_LIMIT: u64 = 1 << 20;
/// Largest accepted condition number of `J_xi`.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FimPath {
    Enumerate,
    Factorized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimOptions {
    pub path: FimPath,
    /// Limit on enumerated outcomes (or classes, on the factorized path).
    pub cap: u64,
    pub psi_limit: u64,
}

impl Default for FimOptions {
    fn default() -> Self {
        Self {
            path: FimPath::Enumerate,
            cap: DEFAULT_OUTCOME_CAP,
            psi_limit: PSI_MATERIALIZE_LIMIT,
        }
    }
}

impl FimOptions {
    pub fn factorized() -> Self {
        Self {
            path: FimPath::Factorized,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimBlocks {
    pub j_c0: f64,
    pub j_ca: f64,
    pub f_a: Vec<f64>,
    pub j_xi: Vec<Vec<f64>>,
    /// `psi^theta_i` for every outcome (or class).
    pub gamma_theta: Option<Vec<f64>>,
    /// `d x |R|`: row `k` holds `psi^xi_{i,k}`.
    pub xi_matrix: Option<Vec<Vec<f64>>>,
    pub malicious_devices: usize,
    pub path: FimPath,
}

impl FimBlocks {
    pub fn j_theta(&self) -> f64 {
        self.j_c0 + self.j_ca
    }

    pub fn xi_dim(&self) -> usize {
        self.f_a.len()
    }

    /// The full matrix `[[J_theta, f_a^T], [f_a, J_xi]]`.
    pub fn full_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.xi_dim();
        let mut m = vec![vec![0.0; d + 1]; d + 1];
        m[0][0] = self.j_theta();
        for k in 0..d {
            m[0][k + 1] = self.f_a[k];
            m[k + 1][0] = self.f_a[k];
            for l in 0..d {
                m[k + 1][l + 1] = self.j_xi[k][l];
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub crb_theta: f64,
    /// `1 / J_C0`.
    pub bound: f64,
    /// `None` when the psi vectors were not materialized.
    pub alignment_residual: Option<f64>,
    /// `J_Ca - f_a^T J_xi^{-1} f_a`.
    pub schur_gap: f64,
    pub used_pseudo_inverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbOptions {
    pub condition_limit: f64,
    /// Replace the inverse of an ill-conditioned `J_xi` by its pseudo-inverse.
    /// This departs from the exact CRB and is off by default.
    pub pseudo_inverse_fallback: bool,
}

impl Default for CrbOptions {
    fn default() -> Self {
        Self {
            condition_limit: CONDITION_LIMIT,
            pseudo_inverse_fallback: false,
        }
    }
}

/// Accumulator for the sums defining the FIM blocks.
#[derive(Debug, Clone)]
struct FimSums {
    j_c0: CompensatedSum,
    j_ca: CompensatedSum,
    f_a: Vec<CompensatedSum>,
    j_xi: Vec<Vec<CompensatedSum>>,
    gamma: Vec<f64>,
    xi_rows: Vec<Vec<f64>>,
}

impl FimSums {
    fn new(d: usize) -> Self {
        Self {
            j_c0: CompensatedSum::new(),
            j_ca: CompensatedSum::new(),
            f_a: vec![CompensatedSum::new(); d],
            j_xi: vec![vec![CompensatedSum::new(); d]; d],
            gamma: Vec::new(),
            xi_rows: vec![Vec::new(); d],
        }
    }

    /// Adds the malicious-side terms of one outcome. `weight` is `phi_0` on
    /// the reference path and the class size on the factorized path.
    fn add_malicious(
        &mut self,
        weight: f64,
        phia: f64,
        dtheta: f64,
        dxi: &[f64],
        keep_psi: bool,
        index: u64,
    ) -> Result<()> {
        let d = dxi.len();
        let (ratio, root) = if weight == 0.0 {
            (0.0, 0.0)
        } else if phia > 0.0 {
            (weight / phia, (weight / phia).sqrt())
        } else if dtheta == 0.0 && dxi.iter().all(|&x| x == 0.0) {
            (0.0, 0.0)
        } else {
            return Err(Error::SingularWeight { outcome: index });
        };
        self.j_ca.add(ratio * dtheta * dtheta);
        for k in 0..d {
            self.f_a[k].add(ratio * dtheta * dxi[k]);
            for l in 0..d {
                self.j_xi[k][l].add(ratio * dxi[k] * dxi[l]);
            }
        }
        if keep_psi {
            self.gamma.push(root * dtheta);
            for k in 0..d {
                self.xi_rows[k].push(root * dxi[k]);
            }
        }
        Ok(())
    }

    fn add_outcome(&mut self, t: &OutcomeTerms, keep_psi: bool, index: u64) -> Result<()> {
        if t.phi0 > 0.0 {
            self.j_c0.add(t.phia / t.phi0 * t.dphi0_dtheta * t.dphi0_dtheta);
        }
        self.add_malicious(t.phi0, t.phia, t.dphia_dtheta, &t.dphia_dxi, keep_psi, index)
    }

    fn merge(mut self, other: FimSums) -> FimSums {
        self.j_c0.merge(&other.j_c0);
        self.j_ca.merge(&other.j_ca);
        for (a, b) in self.f_a.iter_mut().zip(&other.f_a) {
            a.merge(b);
        }
        for (ra, rb) in self.j_xi.iter_mut().zip(&other.j_xi) {
            for (a, b) in ra.iter_mut().zip(rb) {
                a.merge(b);
            }
        }
        self.gamma.extend(other.gamma);
        for (a, b) in self.xi_rows.iter_mut().zip(other.xi_rows) {
            a.extend(b);
        }
        self
    }

    fn finish(self, keep_psi: bool, malicious_devices: usize, path: FimPath, j_c0: Option<f64>) -> FimBlocks {
        FimBlocks {
            j_c0: j_c0.unwrap_or_else(|| self.j_c0.value()),
            j_ca: self.j_ca.value(),
            f_a: self.f_a.iter().map(CompensatedSum::value).collect(),
            j_xi: self
                .j_xi
                .iter()
                .map(|r| r.iter().map(CompensatedSum::value).collect())
                .collect(),
            gamma_theta: keep_psi.then_some(self.gamma),
            xi_matrix: keep_psi.then_some(self.xi_rows),
            malicious_devices,
            path,
        }
    }
}

/// FIM blocks by exhaustive enumeration of `R`.
pub fn fim_blocks(scenario: &Scenario, attack: &AttackSpec, p: &AlphabetPmf) -> Result<FimBlocks> {
    fim_blocks_with(scenario, attack, p, &FimOptions::default())
}

pub fn fim_blocks_with(
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
    options: &FimOptions,
) -> Result<FimBlocks> {
    scenario.validate()?;
    attack.validate_against(scenario)?;
    check_honest_pmf(scenario, p)?;
    require_all_partials(p, attack)?;
    match options.path {
        FimPath::Enumerate => enumerate_blocks(scenario, attack, p, options),
        FimPath::Factorized => factorized_blocks(scenario, attack, p, options),
    }
}

fn enumerate_blocks(
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
    options: &FimOptions,
) -> Result<FimBlocks> {
    let space = OutcomeSpace::new(scenario, options.cap)?;
    let d = attack.xi.len();
    let keep_psi = space.len() <= options.psi_limit;
    let table = FactorTable::new(p, &attack.attack_pmf, d);
    let seg = Segments::new(scenario, attack.fork_point);
    let sums = space.par_reduce(
        |range| {
            let mut acc = FimSums::new(d);
            for i in range {
                let t = outcome_terms(&space.outcome(i), scenario, seg, attack.dsa_prob, &table);
                acc.add_outcome(&t, keep_psi, i)?;
            }
            Ok(acc)
        },
        FimSums::merge,
    )?;
    Ok(sums.finish(keep_psi, scenario.malicious.len(), FimPath::Enumerate, None))
}

fn factorized_blocks(
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
    options: &FimOptions,
) -> Result<FimBlocks> {
    let d = attack.xi.len();
    let j_c0 = (scenario.honest.len() * scenario.chain_length) as f64 * p.fisher_information()?;
    let seg = Segments::new(scenario, attack.fork_point);
    let classes = MaliciousClasses::new(scenario.alphabet_size, seg, scenario.malicious.len(), options.cap)?;
    let table = FactorTable::new(p, &attack.attack_pmf, d);
    let jets = classes.evaluate(&table, attack.dsa_prob);
    let keep_psi = (jets.len() as u64) <= options.psi_limit;
    let mut acc = FimSums::new(d);
    for (i, (jet, (_, mult))) in jets.iter().zip(&classes.classes).enumerate() {
        acc.add_malicious(*mult, jet.v, jet.dt, &jet.dx, keep_psi, i as u64)?;
    }
    Ok(acc.finish(keep_psi, scenario.malicious.len(), FimPath::Factorized, Some(j_c0)))
}

/// `J_xi^{-1} f_a`, guarded by the condition-number limit.
fn solve_xi(blocks: &FimBlocks, options: &CrbOptions) -> Result<(Vec<f64>, bool)> {
    let d = blocks.xi_dim();
    let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (blocks.j_xi[i][j] + blocks.j_xi[j][i]));
    let rhs = DVector::from_column_slice(&blocks.f_a);
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 && max > 0.0 { max / min } else { f64::INFINITY };
    if condition <= options.condition_limit {
        if let Some(chol) = m.clone().cholesky() {
            return Ok((chol.solve(&rhs).iter().copied().collect(), false));
        }
    }
    if options.pseudo_inverse_fallback && max > 0.0 {
        let pinv = m
            .pseudo_inverse(max * f64::EPSILON * d as f64)
            .map_err(|_| Error::SingularFim { condition })?;
        return Ok(((pinv * rhs).iter().copied().collect(), true));
    }
    Err(Error::SingularFim { condition })
}

pub fn crb_theta(blocks: &FimBlocks) -> Result<CrbReport> {
    crb_theta_with(blocks, &CrbOptions::default())
}

/// `CRB_theta = [J_C0 + (J_Ca - f_a^T J_xi^{-1} f_a)]^{-1}`.
///
/// With no malicious devices there is no nuisance parameter and the CRB is
/// `1 / J_C0`.
pub fn crb_theta_with(blocks: &FimBlocks, options: &CrbOptions) -> Result<CrbReport> {
    if !(blocks.j_c0 > 0.0) {
        return Err(Error::DegenerateInformation(
            "J_C0 = 0: honest data carry no information on theta".into(),
        ));
    }
    let bound = 1.0 / blocks.j_c0;
    if blocks.malicious_devices == 0 {
        return Ok(CrbReport {
            crb_theta: bound,
            bound,
            alignment_residual: Some(0.0),
            schur_gap: 0.0,
            used_pseudo_inverse: false,
        });
    }
    let (h, used_pseudo_inverse) = solve_xi(blocks, options)?;
    let quad: f64 = blocks.f_a.iter().zip(&h).map(|(f, h)| f * h).sum();
    let schur_gap = blocks.j_ca - quad;
    let alignment_residual = match residual_with(blocks, &h) {
        Ok(r) => Some(r),
        Err(Error::ResidualUnavailable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CrbReport {
        crb_theta: 1.0 / (blocks.j_c0 + schur_gap),
        bound,
        alignment_residual,
        schur_gap,
        used_pseudo_inverse,
    })
}

/// `|| gamma^T - Xi^T h ||^2` with `h = (Xi Xi^T)^{-1} Xi gamma^T`; zero exactly
/// when `gamma` lies in the row span of `Xi`.
pub fn alignment_residual(blocks: &FimBlocks) -> Result<f64> {
    if blocks.malicious_devices == 0 {
        return Ok(0.0);
    }
    let (h, _) = solve_xi(blocks, &CrbOptions::default())?;
    residual_with(blocks, &h)
}

fn residual_with(blocks: &FimBlocks, h: &[f64]) -> Result<f64> {
    let (gamma, xi) = match (&blocks.gamma_theta, &blocks.xi_matrix) {
        (Some(g), Some(x)) => (g, x),
        _ => {
            return Err(Error::ResidualUnavailable(
                "psi vectors were not materialized for this outcome space".into(),
            ))
        }
    };
    Ok(gamma
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let proj: f64 = xi.iter().zip(h).map(|(row, hk)| row[i] * hk).sum();
            let r = g - proj;
            r * r
        })
        .collect::<CompensatedSum>()
        .value())
}

/// Convenience: FIM and CRB in one call on the chosen path.
pub fn crb_for(
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
    options: &FimOptions,
) -> Result<CrbReport> {
    crb_theta(&fim_blocks_with(scenario, attack, p, options)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_quantizer_pmf, injection_attack_pmf};

    fn reference_like(fork: usize, prob: f64) -> (Scenario, AttackSpec, AlphabetPmf) {
        let s = Scenario::with_malicious(3, &[2], 5, 4, 2, 2.0);
        let p = gaussian_quantizer_pmf(2.0, 0.1, 1.0).unwrap();
        let attack = AttackSpec {
            fork_point: fork,
            xi: vec![2.5],
            dsa_prob: prob,
            attack_pmf: injection_attack_pmf(2.0, &[2.5], 3.0, 1.0).unwrap(),
        };
        (s, attack, p)
    }

    #[test]
    fn no_attack_baseline_is_closed_form() {
        let s = Scenario::with_malicious(2, &[], 3, 3, 2, 0.0);
        let p = gaussian_quantizer_pmf(0.0, 0.0, 1.0).unwrap();
        let attack = AttackSpec {
            fork_point: 1,
            xi: vec![0.0],
            dsa_prob: 0.5,
            attack_pmf: injection_attack_pmf(0.0, &[0.0], 0.0, 1.0).unwrap(),
        };
        let blocks = fim_blocks(&s, &attack, &p).unwrap();
        assert!((blocks.j_c0 - 3.819_718_634_205_488).abs() < 1e-12);
        let rep = crb_theta(&blocks).unwrap();
        assert!((rep.crb_theta - 0.261_799_387_799_149_4).abs() < 1e-12);
        assert_eq!(rep.crb_theta, rep.bound);
    }

    #[test]
    fn attack_without_xi_information_has_zero_blocks() {
        let (s, mut attack, p) = reference_like(2, 0.3);
        attack.attack_pmf = AlphabetPmf::new(vec![0.2, 0.8])
            .unwrap()
            .with_dtheta(vec![0.0, 0.0])
            .unwrap()
            .with_dxi(vec![vec![0.0], vec![0.0]])
            .unwrap();
        let blocks = fim_blocks(&s, &attack, &p).unwrap();
        assert_eq!(blocks.j_xi, vec![vec![0.0]]);
        assert_eq!(blocks.f_a, vec![0.0]);
        assert!(matches!(crb_theta(&blocks), Err(Error::SingularFim { .. })));
        assert!(matches!(alignment_residual(&blocks), Err(Error::SingularFim { .. })));
    }

    #[test]
    fn psi_reconstructions_match_direct_sums() {
        let (s, attack, p) = reference_like(3, 0.027);
        let b = fim_blocks(&s, &attack, &p).unwrap();
        let g = b.gamma_theta.as_ref().unwrap();
        let x = &b.xi_matrix.as_ref().unwrap()[0];
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let xg: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        assert!((gg - b.j_ca).abs() < 1e-9);
        assert!((xg - b.f_a[0]).abs() < 1e-9);
        assert!((xx - b.j_xi[0][0]).abs() < 1e-9);
    }

    #[test]
    fn factorized_path_matches_enumeration() {
        for fork in 1..=4 {
            let (s, attack, p) = reference_like(fork, [0.00243, 0.0081, 0.027, 0.09][fork - 1]);
            let a = fim_blocks(&s, &attack, &p).unwrap();
            let b = fim_blocks_with(&s, &attack, &p, &FimOptions::factorized()).unwrap();
            assert!((a.j_c0 - b.j_c0).abs() <= 1e-12 * a.j_c0);
            assert!((a.j_ca - b.j_ca).abs() <= 1e-12 * a.j_ca.max(1e-300));
            assert!((a.f_a[0] - b.f_a[0]).abs() <= 1e-12 * a.f_a[0].abs());
            assert!((a.j_xi[0][0] - b.j_xi[0][0]).abs() <= 1e-12 * a.j_xi[0][0]);
            let ra = crb_theta(&a).unwrap();
            let rb = crb_theta(&b).unwrap();
            assert!((ra.alignment_residual.unwrap() - rb.alignment_residual.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_equals_schur_gap_and_dominance_holds() {
        for fork in 1..=4 {
            let (s, attack, p) = reference_like(fork, 0.2);
            let rep = crb_for(&s, &attack, &p, &FimOptions::default()).unwrap();
            assert!(rep.schur_gap >= -1e-9);
            assert!((rep.alignment_residual.unwrap() - rep.schur_gap).abs() < 1e-9);
            assert!(rep.crb_theta <= rep.bound + 1e-9);
        }
    }

    #[test]
    fn perfect_alignment_attains_the_bound() {
        // Full rewrite (L_a = 1) that always succeeds: every malicious symbol
        // is drawn from p~(theta + xi), so d/dtheta and d/dxi coincide.
        let (s, mut attack, p) = reference_like(1, 1.0);
        attack.dsa_prob = 1.0;
        let b = fim_blocks(&s, &attack, &p).unwrap();
        assert!((b.f_a[0] * b.f_a[0] - b.j_ca * b.j_xi[0][0]).abs() < 1e-12);
        let rep = crb_theta(&b).unwrap();
        assert!((rep.crb_theta - rep.bound).abs() < 1e-12);
        assert!(alignment_residual(&b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_fallback_is_opt_in() {
        let (s, mut attack, p) = reference_like(2, 0.3);
        attack.attack_pmf = AlphabetPmf::new(vec![0.2, 0.8])
            .unwrap()
            .with_dtheta(vec![-0.1, 0.1])
            .unwrap()
            .with_dxi(vec![vec![0.0], vec![0.0]])
            .unwrap();
        let b = fim_blocks(&s, &attack, &p).unwrap();
        assert!(crb_theta(&b).is_err());
        let opts = CrbOptions {
            pseudo_inverse_fallback: true,
            ..CrbOptions::default()
        };
        // J_xi = 0 has no usable pseudo-inverse scale either.
        assert!(crb_theta_with(&b, &opts).is_err());
    }

    #[test]
    fn psi_not_kept_above_limit() {
        let (s, attack, p) = reference_like(2, 0.3);
        let opts = FimOptions {
            psi_limit: 100,
            ..FimOptions::default()
        };
        let b = fim_blocks_with(&s, &attack, &p, &opts).unwrap();
        assert!(b.gamma_theta.is_none());
        let rep = crb_theta(&b).unwrap();
        assert!(rep.alignment_residual.is_none());
        assert!(matches!(alignment_residual(&b), Err(Error::ResidualUnavailable(_))));
    }

    #[test]
    fn zero_attack_probability_is_singular_weight() {
        let (s, mut attack, p) = reference_like(2, 1.0);
        attack.attack_pmf = AlphabetPmf::new(vec![0.0, 1.0])
            .unwrap()
            .with_dtheta(vec![0.1, -0.1])
            .unwrap()
            .with_dxi(vec![vec![0.1], vec![-0.1]])
            .unwrap();
        assert!(matches!(fim_blocks(&s, &attack, &p), Err(Error::SingularWeight { .. })));
    }
}
