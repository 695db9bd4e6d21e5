//! Relaxed attack problem: minimize `sum_r X_r Y_r` subject to
//! `sum_r phi_0(r) Y_r = 1` and `0 <= Y_r <= 1`, with
//! `X_r = (d phi_0 / d theta)^2 / phi_0`. The minimum is reached by raising a
//! water level `lambda` through the sorted ratios `Omega_r = X_r / phi_0(r)`.
//!
//! A table entry may stand for several outcomes with identical `(X, w)`;
//! `multiplicity` counts them. The full table has one entry per outcome in
//! `R`. The collapsed table has one entry per honest symbol-count class, which
//! is exact because both `X` and `w` depend on honest coordinates only.

use crate::classes::honest_classes;
use crate::error::{Error, Result};
use crate::model::{check_honest_pmf, AlphabetPmf, Scenario};
use crate::numeric::{nearly_equal, CompensatedSum};
use crate::outcome::{honest_jet, FactorTable, OutcomeSpace, DEFAULT_OUTCOME_CAP};
use std::cmp::Ordering;

/// Relative tolerance for grouping tied `Omega` values.
pub const TIE_TOL: f64 = 1e-12;
/// Absolute tolerance for the KKT certificate.
pub const KKT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub omega: Vec<f64>,
    pub multiplicity: Vec<f64>,
    /// Outcomes (counted with multiplicity) removed because `phi_0 = 0`.
    pub dropped: f64,
    pub collapsed: bool,
}

impl SensitivityTable {
    /// Table with unit multiplicities. Entries with `w = 0` are dropped.
    pub fn from_parts(x: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let m = vec![1.0; x.len()];
        Self::with_multiplicity(x, w, m)
    }

    pub fn with_multiplicity(x: Vec<f64>, w: Vec<f64>, multiplicity: Vec<f64>) -> Result<Self> {
        if x.len() != w.len() || x.len() != multiplicity.len() {
            return Err(Error::InvalidParameter(format!(
                "table lengths differ: x {}, w {}, multiplicity {}",
                x.len(),
                w.len(),
                multiplicity.len()
            )));
        }
        let mut t = Self {
            x: Vec::with_capacity(x.len()),
            w: Vec::with_capacity(x.len()),
            omega: Vec::with_capacity(x.len()),
            multiplicity: Vec::with_capacity(x.len()),
            dropped: 0.0,
            collapsed: false,
        };
        for ((xr, wr), mr) in x.into_iter().zip(w).zip(multiplicity) {
            if !(xr >= 0.0 && xr.is_finite()) || !(wr >= 0.0 && wr.is_finite()) || !(mr > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "table entry needs X >= 0, w >= 0, multiplicity > 0; got ({xr}, {wr}, {mr})"
                )));
            }
            if wr == 0.0 {
                t.dropped += mr;
                continue;
            }
            t.x.push(xr);
            t.w.push(wr);
            t.omega.push(xr / wr);
            t.multiplicity.push(mr);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `sum_r w_r` over the active set.
    pub fn total_weight(&self) -> f64 {
        self.w
            .iter()
            .zip(&self.multiplicity)
            .map(|(w, m)| w * m)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn total_x(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.multiplicity)
            .map(|(x, m)| x * m)
            .collect::<CompensatedSum>()
            .value()
    }

    /// `sum_r X_r Y_r` for a per-entry `y`.
    pub fn objective(&self, y: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.multiplicity[i] * self.x[i] * y[i])
            .collect::<CompensatedSum>()
            .value()
    }

    /// `sum_r w_r Y_r` for a per-entry `y`.
    pub fn budget(&self, y: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.multiplicity[i] * self.w[i] * y[i])
            .collect::<CompensatedSum>()
            .value()
    }

    /// Total number of outcomes represented, dropped ones included.
    pub fn outcome_count(&self) -> f64 {
        self.multiplicity.iter().sum::<f64>() + self.dropped
    }
}

fn check_identifiable(t: &SensitivityTable) -> Result<()> {
    if t.is_empty() {
        return Err(Error::DegenerateInformation("every outcome has phi_0 = 0".into()));
    }
    if t.x.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateInformation(
            "X_r = 0 everywhere: theta is unidentifiable from honest data".into(),
        ));
    }
    Ok(())
}

/// Sensitivity table over the full outcome space `R`.
pub fn sensitivity_weights(scenario: &Scenario, p: &AlphabetPmf) -> Result<SensitivityTable> {
    sensitivity_weights_full(scenario, p, DEFAULT_OUTCOME_CAP)
}

pub fn sensitivity_weights_full(scenario: &Scenario, p: &AlphabetPmf, cap: u64) -> Result<SensitivityTable> {
    scenario.validate()?;
    check_honest_pmf(scenario, p)?;
    p.require_dtheta("honest pmf")?;
    let space = OutcomeSpace::new(scenario, cap)?;
    let table = FactorTable::honest_only(p);
    let n = space.len() as usize;
    let (mut x, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for o in space.iter() {
        let jet = honest_jet(scenario.honest.iter().map(|&j| o.row(j)), &table);
        w.push(jet.v);
        x.push(if jet.v > 0.0 { jet.dt * jet.dt / jet.v } else { 0.0 });
    }
    let t = SensitivityTable::from_parts(x, w)?;
    check_identifiable(&t)?;
    Ok(t)
}

/// Sensitivity table grouped by honest symbol counts. Each class entry
/// carries its honest-pattern count times `|O|^(|C_a| L)` malicious patterns.
/// `cap` limits the number of classes.
pub fn sensitivity_weights_collapsed(scenario: &Scenario, p: &AlphabetPmf, cap: u64) -> Result<SensitivityTable> {
    scenario.validate()?;
    check_honest_pmf(scenario, p)?;
    p.require_dtheta("honest pmf")?;
    let coords = scenario.honest.len() * scenario.chain_length;
    let malicious_patterns =
        (scenario.alphabet_size as f64).powi((scenario.malicious.len() * scenario.chain_length) as i32);
    let classes = honest_classes(p, coords, cap)?;
    let mut x = Vec::with_capacity(classes.len());
    let mut w = Vec::with_capacity(classes.len());
    let mut m = Vec::with_capacity(classes.len());
    for c in classes {
        x.push(if c.phi0 > 0.0 { c.dphi0_dtheta * c.dphi0_dtheta / c.phi0 } else { 0.0 });
        w.push(c.phi0);
        m.push(c.multiplicity * malicious_patterns);
    }
    let mut t = SensitivityTable::with_multiplicity(x, w, m)?;
    t.collapsed = true;
    check_identifiable(&t)?;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// `Y = 0`, `lambda < Omega`.
    S1,
    /// `Y = 1`, `lambda > Omega`.
    S2,
    /// Boundary group, `lambda = Omega`.
    S3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub lambda_star: f64,
    pub y_star: Vec<f64>,
    pub partition: Vec<Part>,
    pub objective: f64,
    pub guarantee: f64,
    pub kkt_mu: Vec<f64>,
    pub kkt_nu: Vec<f64>,
}

impl WaterfillSolution {
    pub fn members(&self, part: Part) -> Vec<usize> {
        (0..self.partition.len()).filter(|&i| self.partition[i] == part).collect()
    }
}

/// Entry indices sorted by `Omega`, split into tie groups.
fn omega_groups(t: &SensitivityTable) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t.omega[a].total_cmp(&t.omega[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if nearly_equal(t.omega[g[0]], t.omega[i], TIE_TOL) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn group_weight(t: &SensitivityTable, g: &[usize]) -> f64 {
    g.iter()
        .map(|&i| t.multiplicity[i] * t.w[i])
        .collect::<CompensatedSum>()
        .value()
}

fn check_feasible(t: &SensitivityTable) -> Result<()> {
    if t.is_empty() {
        return Err(Error::DegenerateInformation("empty active set".into()));
    }
    let total = t.total_weight();
    if total < 1.0 {
        return Err(Error::InfeasibleRelaxation { total });
    }
    Ok(())
}

/// Water-filling solution with its KKT multipliers.
///
/// The group at which the budget is met forms `S3` and takes the level
/// `lambda* = Omega`. When the budget is met exactly at the end of a group,
/// that group is `S3` with `Y = 1`, which is the lower endpoint of the
/// interval of optimal levels.
pub fn waterfill(t: &SensitivityTable) -> Result<WaterfillSolution> {
    check_feasible(t)?;
    let groups = omega_groups(t);
    let n = t.len();
    let mut y = vec![0.0; n];
    let mut partition = vec![Part::S1; n];
    let mut filled = CompensatedSum::new();
    let mut lambda = f64::NAN;
    for g in &groups {
        let gw = group_weight(t, g);
        let before = filled.value();
        if before + gw >= 1.0 {
            let frac = ((1.0 - before) / gw).clamp(0.0, 1.0);
            for &i in g {
                y[i] = frac;
                partition[i] = Part::S3;
            }
            lambda = t.omega[g[0]];
            break;
        }
        for &i in g {
            y[i] = 1.0;
            partition[i] = Part::S2;
        }
        filled.add(gw);
    }
    if lambda.is_nan() {
        // rounding left the budget a hair short; the last group closes it
        let g = groups.last().expect("nonempty active set");
        for &i in g {
            partition[i] = Part::S3;
        }
        lambda = t.omega[g[0]];
    }
    let mut mu = vec![0.0; n];
    let mut nu = vec![0.0; n];
    for i in 0..n {
        let slack = t.x[i] - lambda * t.w[i];
        match partition[i] {
            Part::S1 => mu[i] = slack.max(0.0),
            Part::S2 => nu[i] = (-slack).max(0.0),
            Part::S3 => {}
        }
    }
    let objective = t.objective(&y);
    Ok(WaterfillSolution {
        lambda_star: lambda,
        y_star: y,
        partition,
        objective,
        guarantee: 1.0 / objective,
        kkt_mu: mu,
        kkt_nu: nu,
    })
}

/// Checks primal feasibility, dual feasibility, complementary slackness,
/// stationarity and the partition law for a solution, independently of how it
/// was produced.
pub fn verify_kkt(t: &SensitivityTable, s: &WaterfillSolution, tol: f64) -> Result<()> {
    let fail = |msg: String| Err(Error::CertificateFailed(msg));
    let n = t.len();
    if s.y_star.len() != n || s.kkt_mu.len() != n || s.kkt_nu.len() != n || s.partition.len() != n {
        return fail("solution length does not match table".into());
    }
    let budget = t.budget(&s.y_star);
    if (budget - 1.0).abs() > tol {
        return fail(format!("budget {budget} != 1"));
    }
    let lam = s.lambda_star;
    for i in 0..n {
        let (y, mu, nu) = (s.y_star[i], s.kkt_mu[i], s.kkt_nu[i]);
        if !(-tol..=1.0 + tol).contains(&y) {
            return fail(format!("Y[{i}] = {y} outside [0, 1]"));
        }
        if mu < -tol || nu < -tol {
            return fail(format!("negative multiplier at {i}: mu {mu}, nu {nu}"));
        }
        if (mu * y).abs() > tol || (nu * (1.0 - y)).abs() > tol {
            return fail(format!("complementary slackness violated at {i}"));
        }
        let stationarity = t.x[i] - lam * t.w[i] - mu + nu;
        if stationarity.abs() > tol {
            return fail(format!("stationarity residual {stationarity} at {i}"));
        }
        let om = t.omega[i];
        let expected = if nearly_equal(lam, om, TIE_TOL) {
            Part::S3
        } else if lam < om {
            Part::S1
        } else {
            Part::S2
        };
        if s.partition[i] != expected {
            return fail(format!(
                "entry {i} is {:?} but lambda {lam} vs Omega {om} puts it in {expected:?}",
                s.partition[i]
            ));
        }
    }
    Ok(())
}

/// Water-filling with the certificate checked before returning.
pub fn waterfill_certified(t: &SensitivityTable) -> Result<WaterfillSolution> {
    let s = waterfill(t)?;
    verify_kkt(t, &s, KKT_TOL)?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    At(f64),
    Between(f64, f64),
}

/// One stop of the rising water level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelState {
    pub level: Level,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub s3: Vec<usize>,
    /// `(1 - sum_{S2} w) / sum_{S3} w`, when `S3` is nonempty.
    pub s3_value: Option<f64>,
    /// Whether the state satisfies the budget with every `Y` in `[0, 1]`.
    pub feasible: bool,
}

/// States visited while the level rises from `min Omega`, alternating between
/// each distinct `Omega` and the open interval above it. Stops at the first
/// feasible state.
pub fn water_level_trace(t: &SensitivityTable) -> Result<Vec<LevelState>> {
    check_feasible(t)?;
    let groups = omega_groups(t);
    let mut out = Vec::new();
    let mut below: Vec<usize> = Vec::new();
    let mut below_w = CompensatedSum::new();
    for (k, g) in groups.iter().enumerate() {
        let above: Vec<usize> = groups[k + 1..].iter().flatten().copied().collect();
        let gw = group_weight(t, g);
        let v = (1.0 - below_w.value()) / gw;
        let feasible = (0.0..=1.0).contains(&v);
        out.push(LevelState {
            level: Level::At(t.omega[g[0]]),
            s1: sorted(above.clone()),
            s2: sorted(below.clone()),
            s3: sorted(g.clone()),
            s3_value: Some(v),
            feasible,
        });
        if feasible {
            return Ok(out);
        }
        below.extend(g);
        below_w.add(gw);
        if let Some(next) = groups.get(k + 1) {
            let feasible = below_w.value() == 1.0;
            out.push(LevelState {
                level: Level::Between(t.omega[g[0]], t.omega[next[0]]),
                s1: sorted(above),
                s2: sorted(below.clone()),
                s3: Vec::new(),
                s3_value: None,
                feasible,
            });
            if feasible {
                return Ok(out);
            }
        }
    }
    Ok(out)
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Independent solution of the relaxed linear program.
///
/// The primal comes from a per-entry greedy ordered by cross-multiplied
/// comparisons `X_a w_b < X_b w_a` (no ratios, no tie grouping). The dual
/// function `g(lambda) = lambda + sum_r min(0, X_r - lambda w_r)` is concave
/// and piecewise linear with breakpoints at the `Omega_r`, so its maximum is
/// found by evaluating every breakpoint. Primal and dual must agree.
pub fn lp_oracle(t: &SensitivityTable) -> Result<(f64, Vec<f64>)> {
    if t.is_empty() {
        return Err(Error::DegenerateInformation("empty active set".into()));
    }
    let total = t.total_weight();
    if total < 1.0 {
        return Err(Error::InfeasibleRelaxation { total });
    }
    let n = t.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let lhs = t.x[a] * t.w[b];
        let rhs = t.x[b] * t.w[a];
        lhs.partial_cmp(&rhs).unwrap_or(Ordering::Equal)
    });
    let mut y = vec![0.0; n];
    let mut left = 1.0;
    for &i in &order {
        if left <= 0.0 {
            break;
        }
        let cap = t.multiplicity[i] * t.w[i];
        if cap <= left {
            y[i] = 1.0;
            left -= cap;
        } else {
            y[i] = left / cap;
            left = 0.0;
        }
    }
    let primal = t.objective(&y);
    let dual = (0..n)
        .map(|k| {
            let lam = t.x[k] / t.w[k];
            let mut g = CompensatedSum::new();
            g.add(lam);
            for i in 0..n {
                g.add(t.multiplicity[i] * (t.x[i] - lam * t.w[i]).min(0.0));
            }
            g.value()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = primal.abs().max(dual.abs()).max(1.0);
    if (primal - dual).abs() > 1e-9 * scale {
        return Err(Error::CertificateFailed(format!(
            "duality gap: primal {primal}, dual {dual}"
        )));
    }
    Ok((primal, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub guarantee: f64,
    pub objective: f64,
    pub lambda_star: f64,
    /// `1 / J_C0` for comparison.
    pub honest_bound: f64,
    pub table_entries: usize,
    pub collapsed: bool,
}

/// `1 / min sum_r X_r Y_r`, on the collapsed table.
///
/// The relaxed problem does not involve `L_a` or `P(L_a)`; `p_la_row` is only
/// validated.
pub fn guarantee_bound(scenario: &Scenario, p: &AlphabetPmf, p_la_row: Option<&[f64]>) -> Result<f64> {
    Ok(guarantee_report(scenario, p, p_la_row, DEFAULT_OUTCOME_CAP, true)?.guarantee)
}

pub fn guarantee_report(
    scenario: &Scenario,
    p: &AlphabetPmf,
    p_la_row: Option<&[f64]>,
    cap: u64,
    collapsed: bool,
) -> Result<GuaranteeReport> {
    if let Some(row) = p_la_row {
        if row.len() != scenario.authentic_length {
            return Err(Error::InvalidParameter(format!(
                "P(L_a) row has {} entries, expected L0 = {}",
                row.len(),
                scenario.authentic_length
            )));
        }
        if let Some(bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("P(L_a) value {bad} outside [0, 1]")));
        }
    }
    let t = if collapsed {
        sensitivity_weights_collapsed(scenario, p, cap)?
    } else {
        sensitivity_weights_full(scenario, p, cap)?
    };
    let s = waterfill_certified(&t)?;
    let j_c0 = (scenario.honest.len() * scenario.chain_length) as f64 * p.fisher_information()?;
    Ok(GuaranteeReport {
        guarantee: s.guarantee,
        objective: s.objective,
        lambda_star: s.lambda_star,
        honest_bound: 1.0 / j_c0,
        table_entries: t.len(),
        collapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> SensitivityTable {
        SensitivityTable::from_parts(vec![0.8, 0.4, 0.2, 0.1], vec![0.4; 4]).unwrap()
    }

    #[test]
    fn four_outcome_example() {
        let t = four();
        assert_eq!(t.omega, vec![2.0, 1.0, 0.5, 0.25]);
        let s = waterfill_certified(&t).unwrap();
        for (got, want) in s.y_star.iter().zip([0.0, 0.5, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(s.lambda_star, 1.0);
        assert!((s.objective - 0.5).abs() < 1e-15);
        assert!((s.guarantee - 2.0).abs() < 1e-12);
        assert_eq!(s.partition, vec![Part::S1, Part::S3, Part::S2, Part::S2]);
        let (obj, _) = lp_oracle(&t).unwrap();
        assert!((obj - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_tied_forced_full() {
        let t = SensitivityTable::from_parts(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let s = waterfill_certified(&t).unwrap();
        assert_eq!(s.y_star, vec![1.0, 1.0]);
        assert_eq!(s.objective, 2.0);
        assert_eq!(s.lambda_star, 2.0);
    }

    #[test]
    fn single_outcome() {
        let t = SensitivityTable::from_parts(vec![3.0], vec![2.0]).unwrap();
        let s = waterfill_certified(&t).unwrap();
        assert_eq!(s.y_star, vec![0.5]);
        assert_eq!(s.objective, 1.5);
        assert_eq!(s.lambda_star, 1.5);
        assert_eq!(lp_oracle(&t).unwrap(), (1.5, vec![0.5]));
    }

    #[test]
    fn exact_budget_at_group_end() {
        let t = SensitivityTable::from_parts(vec![0.1, 0.5, 0.9], vec![0.5, 0.5, 0.5]).unwrap();
        let s = waterfill_certified(&t).unwrap();
        assert_eq!(s.y_star, vec![1.0, 1.0, 0.0]);
        assert_eq!(s.lambda_star, 1.0);
        assert_eq!(s.partition, vec![Part::S2, Part::S3, Part::S1]);
    }

    #[test]
    fn errors() {
        let t = SensitivityTable::from_parts(vec![1.0, 1.0], vec![0.3, 0.3]).unwrap();
        assert!(matches!(waterfill(&t), Err(Error::InfeasibleRelaxation { .. })));
        assert!(matches!(lp_oracle(&t), Err(Error::InfeasibleRelaxation { .. })));
        let t = SensitivityTable::from_parts(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(t.dropped, 1.0);
        assert!(matches!(waterfill(&t), Err(Error::DegenerateInformation(_))));
    }

    #[test]
    fn water_level_visits_in_omega_order() {
        let trace = water_level_trace(&four()).unwrap();
        let levels: Vec<Level> = trace.iter().map(|s| s.level).collect();
        assert_eq!(
            levels,
            vec![
                Level::At(0.25),
                Level::Between(0.25, 0.5),
                Level::At(0.5),
                Level::Between(0.5, 1.0),
                Level::At(1.0),
            ]
        );
        assert_eq!(trace[0].s3, vec![3]);
        assert_eq!(trace[2].s2, vec![3]);
        assert_eq!(trace[4].s2, vec![2, 3]);
        assert_eq!(trace[4].s3, vec![1]);
        assert_eq!(trace[4].s1, vec![0]);
        assert!(trace[..4].iter().all(|s| !s.feasible));
        assert!(trace[4].feasible);
        assert!((trace[4].s3_value.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetric_binary_weights() {
        let a: f64 = 0.3;
        let p = AlphabetPmf::new(vec![0.5, 0.5]).unwrap().with_dtheta(vec![-a, a]).unwrap();
        let s = Scenario::with_malicious(1, &[], 1, 1, 2, 0.0);
        let t = sensitivity_weights(&s, &p).unwrap();
        assert!((t.x[0] - a * a / 0.5).abs() < 1e-15);
        assert!((t.x[1] - a * a / 0.5).abs() < 1e-15);
        // Omega = X / phi_0 = 4 a^2
        assert!((t.omega[0] - 4.0 * a * a).abs() < 1e-15);
        assert!((t.omega[1] - 4.0 * a * a).abs() < 1e-15);
    }

    #[test]
    fn zero_information_is_degenerate() {
        let p = AlphabetPmf::new(vec![0.5, 0.5]).unwrap().with_dtheta(vec![0.0, 0.0]).unwrap();
        let s = Scenario::with_malicious(2, &[1], 2, 1, 2, 0.0);
        assert!(matches!(sensitivity_weights(&s, &p), Err(Error::DegenerateInformation(_))));
    }
}
