//! The outcome space `R = O^{N*L}` of stored chain data and the factors of the
//! joint pmf `phi(r) = phi_0(r) * phi_a(r)`.
//!
//! Outcomes are ordered lexicographically with device 0, block 1 as the most
//! significant coordinate. Blocks are one-based in the public API (`L_a`,
//! `L0`), rows are zero-based slices.

use crate::error::{Error, Result};
use crate::model::{AlphabetPmf, AttackSpec, Scenario};
use crate::numeric::CompensatedSum;
use rayon::prelude::*;

/// Default limit on `|R|` for exhaustive enumeration.
pub const DEFAULT_OUTCOME_CAP: u64 = 1 << 24;

/// Outcomes per task in parallel reductions. Fixed so results do not depend
/// on the thread count.
pub(crate) const REDUCTION_CHUNK: u64 = 1 << 12;

/// One realization of the stored chain: an `N x L` array of symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Outcome {
    n_devices: usize,
    chain_length: usize,
    symbols: Vec<usize>,
}

impl Outcome {
    pub fn new(n_devices: usize, chain_length: usize, symbols: Vec<usize>) -> Result<Self> {
        if symbols.len() != n_devices * chain_length {
            return Err(Error::InvalidParameter(format!(
                "outcome has {} symbols, expected {n_devices} x {chain_length}",
                symbols.len()
            )));
        }
        Ok(Self {
            n_devices,
            chain_length,
            symbols,
        })
    }

    /// Builds an outcome from per-device rows.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        let l = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != l) {
            return Err(Error::InvalidParameter("ragged outcome rows".into()));
        }
        Self::new(n, l, rows.concat())
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    pub fn chain_length(&self) -> usize {
        self.chain_length
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// Symbols of device `j` for blocks `1..=L`.
    pub fn row(&self, j: usize) -> &[usize] {
        &self.symbols[j * self.chain_length..(j + 1) * self.chain_length]
    }

    fn check(&self, scenario: &Scenario) {
        debug_assert_eq!(self.n_devices, scenario.n_devices);
        debug_assert_eq!(self.chain_length, scenario.chain_length);
    }
}

/// Indexing of `R` for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeSpace {
    n_devices: usize,
    chain_length: usize,
    alphabet: usize,
    size: u64,
}

/// `base^exp` if it fits under `cap`.
pub fn checked_space_size(base: usize, exp: usize, cap: u64) -> Result<u64> {
    let mut size: u128 = 1;
    for _ in 0..exp {
        size *= base as u128;
        if size > cap as u128 {
            let required = (base as u128).checked_pow(exp as u32).unwrap_or(u128::MAX);
            return Err(Error::OutcomeSpaceTooLarge { required, cap });
        }
    }
    Ok(size as u64)
}

impl OutcomeSpace {
    pub fn new(scenario: &Scenario, cap: u64) -> Result<Self> {
        let size = checked_space_size(scenario.alphabet_size, scenario.coordinates(), cap)?;
        Ok(Self {
            n_devices: scenario.n_devices,
            chain_length: scenario.chain_length,
            alphabet: scenario.alphabet_size,
            size,
        })
    }

    pub fn len(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn decode_into(&self, mut index: u64, buf: &mut Vec<usize>) {
        let k = self.n_devices * self.chain_length;
        buf.clear();
        buf.resize(k, 0);
        for slot in buf.iter_mut().rev() {
            *slot = (index % self.alphabet as u64) as usize;
            index /= self.alphabet as u64;
        }
    }

    pub fn outcome(&self, index: u64) -> Outcome {
        let mut buf = Vec::new();
        self.decode_into(index, &mut buf);
        Outcome {
            n_devices: self.n_devices,
            chain_length: self.chain_length,
            symbols: buf,
        }
    }

    pub fn index_of(&self, outcome: &Outcome) -> u64 {
        outcome
            .symbols
            .iter()
            .fold(0u64, |acc, &s| acc * self.alphabet as u64 + s as u64)
    }

    pub fn iter(&self) -> Outcomes {
        Outcomes {
            space: *self,
            next: 0,
        }
    }

    /// Deterministic chunked parallel map-reduce over outcome indices.
    pub(crate) fn par_reduce<A, M, C>(&self, map: M, mut combine: C) -> Result<A>
    where
        A: Send,
        M: Fn(std::ops::Range<u64>) -> Result<A> + Sync,
        C: FnMut(A, A) -> A,
    {
        let chunks = self.size.div_ceil(REDUCTION_CHUNK);
        let parts: Vec<Result<A>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * REDUCTION_CHUNK;
                let hi = (lo + REDUCTION_CHUNK).min(self.size);
                map(lo..hi)
            })
            .collect();
        let mut acc: Option<A> = None;
        for part in parts {
            let part = part?;
            acc = Some(match acc {
                None => part,
                Some(a) => combine(a, part),
            });
        }
        acc.ok_or_else(|| Error::InvalidParameter("empty outcome space".into()))
    }
}

/// Lexicographic stream over `R`.
#[derive(Debug, Clone)]
pub struct Outcomes {
    space: OutcomeSpace,
    next: u64,
}

impl Iterator for Outcomes {
    type Item = Outcome;

    fn next(&mut self) -> Option<Outcome> {
        if self.next >= self.space.size {
            return None;
        }
        let o = self.space.outcome(self.next);
        self.next += 1;
        Some(o)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.space.size - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Outcomes {}

pub fn enumerate_outcomes(scenario: &Scenario, cap: u64) -> Result<Outcomes> {
    Ok(OutcomeSpace::new(scenario, cap)?.iter())
}

/// A value with its derivative in theta and gradient in xi.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Jet {
    pub v: f64,
    pub dt: f64,
    pub dx: Vec<f64>,
}

impl Jet {
    pub fn one(d: usize) -> Self {
        Self {
            v: 1.0,
            dt: 0.0,
            dx: vec![0.0; d],
        }
    }

    /// `self *= f` by the product rule.
    #[inline]
    pub fn mul_factor(&mut self, f: &SymbolFactor) {
        for (a, &b) in self.dx.iter_mut().zip(&f.dx) {
            *a = *a * f.v + self.v * b;
        }
        self.dt = self.dt * f.v + self.v * f.dt;
        self.v *= f.v;
    }

    pub fn mul_jet(&mut self, f: &Jet) {
        for (a, &b) in self.dx.iter_mut().zip(&f.dx) {
            *a = *a * f.v + self.v * b;
        }
        self.dt = self.dt * f.v + self.v * f.dt;
        self.v *= f.v;
    }

    /// `weight_a * a + weight_b * b` for constant weights.
    pub fn mix(weight_a: f64, a: &Jet, weight_b: f64, b: &Jet) -> Jet {
        Jet {
            v: weight_a * a.v + weight_b * b.v,
            dt: weight_a * a.dt + weight_b * b.dt,
            dx: a
                .dx
                .iter()
                .zip(&b.dx)
                .map(|(x, y)| weight_a * x + weight_b * y)
                .collect(),
        }
    }
}

/// Probability of one symbol with its partials. Honest symbols have zero xi partials.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SymbolFactor {
    pub v: f64,
    pub dt: f64,
    pub dx: Vec<f64>,
}

/// Per-symbol factors for the honest pmf `p` and the attack pmf `p~`.
#[derive(Debug, Clone)]
pub(crate) struct FactorTable {
    pub honest: Vec<SymbolFactor>,
    pub attack: Vec<SymbolFactor>,
    pub xi_dim: usize,
}

impl FactorTable {
    /// Missing partials are filled with zeros; callers that need them check first.
    pub fn new(p: &AlphabetPmf, pt: &AlphabetPmf, xi_dim: usize) -> Self {
        let honest = (0..p.len())
            .map(|o| SymbolFactor {
                v: p.probs()[o],
                dt: p.dtheta().map_or(0.0, |d| d[o]),
                dx: vec![0.0; xi_dim],
            })
            .collect();
        let attack = (0..pt.len())
            .map(|o| SymbolFactor {
                v: pt.probs()[o],
                dt: pt.dtheta().map_or(0.0, |d| d[o]),
                dx: pt.dxi().map_or(vec![0.0; xi_dim], |m| m[o].clone()),
            })
            .collect();
        Self {
            honest,
            attack,
            xi_dim,
        }
    }

    pub fn honest_only(p: &AlphabetPmf) -> Self {
        Self::new(p, p, 0)
    }
}

/// Segment boundaries of a malicious row, as zero-based half-open ranges:
/// untouched `[0, L_a-1)`, rewritten-by-DSA `[L_a-1, L0)`, always falsified `[L0, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Segments {
    pub fork: usize,
    pub authentic: usize,
    pub len: usize,
}

impl Segments {
    pub fn new(scenario: &Scenario, fork_point: usize) -> Self {
        Self {
            fork: fork_point - 1,
            authentic: scenario.authentic_length,
            len: scenario.chain_length,
        }
    }

    pub fn lengths(&self) -> [usize; 3] {
        [
            self.fork,
            self.authentic - self.fork,
            self.len - self.authentic,
        ]
    }
}

/// Product over honest rows, with theta derivative.
pub(crate) fn honest_jet<'a>(rows: impl Iterator<Item = &'a [usize]>, table: &FactorTable) -> Jet {
    let mut acc = Jet::one(0);
    for row in rows {
        for &s in row {
            acc.mul_factor(&table.honest[s]);
        }
    }
    acc
}

/// Products over malicious rows for the successful-DSA and failed-DSA branches.
pub(crate) fn malicious_branch_jets<'a>(
    rows: impl Iterator<Item = &'a [usize]>,
    seg: Segments,
    table: &FactorTable,
) -> (Jet, Jet) {
    let mut success = Jet::one(table.xi_dim);
    let mut failure = Jet::one(table.xi_dim);
    for row in rows {
        for (l, &s) in row.iter().enumerate() {
            if l < seg.fork {
                success.mul_factor(&table.honest[s]);
                failure.mul_factor(&table.honest[s]);
            } else if l < seg.authentic {
                success.mul_factor(&table.attack[s]);
                failure.mul_factor(&table.honest[s]);
            } else {
                success.mul_factor(&table.attack[s]);
                failure.mul_factor(&table.attack[s]);
            }
        }
    }
    (success, failure)
}

/// All per-outcome quantities used by the Fisher information.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTerms {
    pub phi0: f64,
    pub dphi0_dtheta: f64,
    pub phia: f64,
    pub dphia_dtheta: f64,
    pub dphia_dxi: Vec<f64>,
}

pub(crate) fn outcome_terms(
    outcome: &Outcome,
    scenario: &Scenario,
    seg: Segments,
    dsa_prob: f64,
    table: &FactorTable,
) -> OutcomeTerms {
    let h = honest_jet(scenario.honest.iter().map(|&j| outcome.row(j)), table);
    let (s, f) = malicious_branch_jets(scenario.malicious.iter().map(|&j| outcome.row(j)), seg, table);
    let a = Jet::mix(dsa_prob, &s, 1.0 - dsa_prob, &f);
    OutcomeTerms {
        phi0: h.v,
        dphi0_dtheta: h.dt,
        phia: a.v,
        dphia_dtheta: a.dt,
        dphia_dxi: a.dx,
    }
}

/// `phi_0(r)`: product of `p` over honest coordinates (1 for an empty honest set).
pub fn honest_factor(outcome: &Outcome, scenario: &Scenario, p: &AlphabetPmf) -> f64 {
    outcome.check(scenario);
    scenario
        .honest
        .iter()
        .flat_map(|&j| outcome.row(j))
        .map(|&s| p.probs()[s])
        .product()
}

/// The two mixture components of `phi_a`: the malicious-row products given a
/// successful DSA and given a failed one (before weighting by `P(L_a)`).
pub fn malicious_components(
    outcome: &Outcome,
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
) -> (f64, f64) {
    outcome.check(scenario);
    let table = FactorTable::new(p, &attack.attack_pmf, 0);
    let (s, f) = malicious_branch_jets(
        scenario.malicious.iter().map(|&j| outcome.row(j)),
        Segments::new(scenario, attack.fork_point),
        &table,
    );
    (s.v, f.v)
}

/// `phi_a(r)`: DSA-mixture of the malicious-row products.
pub fn malicious_factor(
    outcome: &Outcome,
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
) -> f64 {
    let (s, f) = malicious_components(outcome, scenario, attack, p);
    attack.dsa_prob * s + (1.0 - attack.dsa_prob) * f
}

pub fn joint_pmf(outcome: &Outcome, scenario: &Scenario, attack: &AttackSpec, p: &AlphabetPmf) -> f64 {
    honest_factor(outcome, scenario, p) * malicious_factor(outcome, scenario, attack, p)
}

pub fn dphi0_dtheta(outcome: &Outcome, scenario: &Scenario, p: &AlphabetPmf) -> Result<f64> {
    outcome.check(scenario);
    p.require_dtheta("honest pmf")?;
    let table = FactorTable::honest_only(p);
    Ok(honest_jet(scenario.honest.iter().map(|&j| outcome.row(j)), &table).dt)
}

fn malicious_jet(
    outcome: &Outcome,
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
) -> Jet {
    outcome.check(scenario);
    let table = FactorTable::new(p, &attack.attack_pmf, attack.xi.len());
    let (s, f) = malicious_branch_jets(
        scenario.malicious.iter().map(|&j| outcome.row(j)),
        Segments::new(scenario, attack.fork_point),
        &table,
    );
    Jet::mix(attack.dsa_prob, &s, 1.0 - attack.dsa_prob, &f)
}

pub fn dphia_dtheta(
    outcome: &Outcome,
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
) -> Result<f64> {
    p.require_dtheta("honest pmf")?;
    attack.attack_pmf.require_dtheta("attack pmf")?;
    Ok(malicious_jet(outcome, scenario, attack, p).dt)
}

pub fn dphia_dxi(
    outcome: &Outcome,
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
) -> Result<Vec<f64>> {
    attack.attack_pmf.require_dxi("attack pmf")?;
    Ok(malicious_jet(outcome, scenario, attack, p).dx)
}

/// Checks that the partials needed for Fisher information are present.
pub(crate) fn require_all_partials(p: &AlphabetPmf, attack: &AttackSpec) -> Result<()> {
    p.require_dtheta("honest pmf")?;
    attack.attack_pmf.require_dtheta("attack pmf")?;
    attack.attack_pmf.require_dxi("attack pmf")?;
    Ok(())
}

/// Dense tables of `phi_0`, `phi_a` and their partials over all of `R`,
/// indexed by outcome index.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTables {
    pub phi0: Vec<f64>,
    pub phia: Vec<f64>,
    pub dphi0_dtheta: Vec<f64>,
    pub dphia_dtheta: Vec<f64>,
    pub dphia_dxi: Vec<Vec<f64>>,
}

impl OutcomeTables {
    pub fn build(scenario: &Scenario, attack: &AttackSpec, p: &AlphabetPmf, cap: u64) -> Result<Self> {
        scenario.validate()?;
        attack.validate_against(scenario)?;
        require_all_partials(p, attack)?;
        let space = OutcomeSpace::new(scenario, cap)?;
        let table = FactorTable::new(p, &attack.attack_pmf, attack.xi.len());
        let seg = Segments::new(scenario, attack.fork_point);
        let terms: Vec<OutcomeTerms> = (0..space.len())
            .into_par_iter()
            .map(|i| outcome_terms(&space.outcome(i), scenario, seg, attack.dsa_prob, &table))
            .collect();
        Ok(Self {
            phi0: terms.iter().map(|t| t.phi0).collect(),
            phia: terms.iter().map(|t| t.phia).collect(),
            dphi0_dtheta: terms.iter().map(|t| t.dphi0_dtheta).collect(),
            dphia_dtheta: terms.iter().map(|t| t.dphia_dtheta).collect(),
            dphia_dxi: terms.into_iter().map(|t| t.dphia_dxi).collect(),
        })
    }

    /// `sum_r phi_0(r) phi_a(r)` with compensated summation.
    pub fn total_mass(&self) -> f64 {
        self.phi0
            .iter()
            .zip(&self.phia)
            .map(|(a, b)| a * b)
            .collect::<CompensatedSum>()
            .value()
    }
}
