//! Worst-case attack search: maximize `CRB_theta` over the attack parameters
//! `xi` of a parametric attack family and over the fork point `L_a`.

use crate::error::{Error, Result};
use crate::fisher::{crb_theta, fim_blocks_with, FimOptions};
use crate::model::{check_honest_pmf, AlphabetPmf, AttackSpec, PmfFamily, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct OptOptions {
    pub starts: usize,
    pub lower: f64,
    pub upper: f64,
    pub max_iterations: usize,
    /// Stop when an accepted step changes the value by less than this.
    pub tolerance: f64,
    /// Central-difference step for the CRB gradient.
    pub fd_step: f64,
    pub initial_step: f64,
    pub seed: u64,
    /// Tried before the generated starts.
    pub user_starts: Vec<Vec<f64>>,
    pub fim: FimOptions,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            lower: -10.0,
            upper: 10.0,
            max_iterations: 500,
            tolerance: 1e-8,
            fd_step: 1e-5,
            initial_step: 1.0,
            seed: 0,
            user_starts: Vec::new(),
            fim: FimOptions::factorized(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartTrace {
    pub fork_point: usize,
    pub start: Vec<f64>,
    pub iterations: usize,
    pub final_value: f64,
    pub final_xi: Vec<f64>,
    /// Objective after each accepted step, starting value first.
    pub history: Vec<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForkValue {
    pub fork_point: usize,
    pub crb: f64,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOptResult {
    pub best_crb: f64,
    pub best_xi: Vec<f64>,
    pub best_fork: usize,
    pub per_fork_values: Vec<ForkValue>,
    pub trace: Vec<StartTrace>,
    /// Set when there are no malicious devices and the objective is constant.
    pub no_op: bool,
    /// `1 / J_C0`.
    pub honest_bound: f64,
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Shifted Halton points scaled into the box.
pub fn halton_starts(count: usize, dim: usize, lower: f64, upper: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dim > PRIMES.len() {
        return Err(Error::UnsupportedDimension(dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    Ok((1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|k| {
                    let u = (radical_inverse(i, PRIMES[k]) + shift[k]).fract();
                    lower + (upper - lower) * u
                })
                .collect()
        })
        .collect())
}

/// One point evaluation of the objective.
struct Objective<'a> {
    scenario: &'a Scenario,
    p: &'a AlphabetPmf,
    family: &'a dyn PmfFamily,
    fim: FimOptions,
}

impl Objective<'_> {
    fn crb(&self, fork: usize, dsa_prob: f64, xi: &[f64]) -> Result<f64> {
        let attack = AttackSpec {
            fork_point: fork,
            xi: xi.to_vec(),
            dsa_prob,
            attack_pmf: self.family.evaluate(self.scenario.theta, xi)?,
        };
        let blocks = fim_blocks_with(self.scenario, &attack, self.p, &self.fim)?;
        Ok(crb_theta(&blocks)?.crb_theta)
    }
}

fn project(x: &mut [f64], lo: f64, hi: f64) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

fn ascend(obj: &Objective, fork: usize, dsa_prob: f64, start: &[f64], o: &OptOptions) -> StartTrace {
    let mut trace = StartTrace {
        fork_point: fork,
        start: start.to_vec(),
        iterations: 0,
        final_value: f64::NAN,
        final_xi: start.to_vec(),
        history: Vec::new(),
        converged: false,
        error: None,
    };
    let mut x = start.to_vec();
    project(&mut x, o.lower, o.upper);
    let mut fx = match obj.crb(fork, dsa_prob, &x) {
        Ok(v) => v,
        Err(e) => {
            trace.error = Some(e.to_string());
            return trace;
        }
    };
    trace.history.push(fx);
    let d = x.len();
    let mut step = o.initial_step;
    for it in 0..o.max_iterations {
        trace.iterations = it + 1;
        let mut grad = vec![0.0; d];
        for k in 0..d {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[k] = (x[k] + o.fd_step).min(o.upper);
            lo[k] = (x[k] - o.fd_step).max(o.lower);
            let (fh, fl) = match (obj.crb(fork, dsa_prob, &hi), obj.crb(fork, dsa_prob, &lo)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => break,
            };
            grad[k] = (fh - fl) / (hi[k] - lo[k]);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            trace.converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        while t > 1e-12 {
            let mut y: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + t * g / norm).collect();
            project(&mut y, o.lower, o.upper);
            let moved: f64 = y.iter().zip(&x).zip(&grad).map(|((a, b), g)| (a - b) * g).sum();
            if let Ok(fy) = obj.crb(fork, dsa_prob, &y) {
                if moved > 0.0 && fy >= fx + 1e-4 * moved {
                    accepted = Some((y, fy));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((y, fy)) = accepted else {
            trace.converged = true;
            break;
        };
        let change = fy - fx;
        x = y;
        fx = fy;
        trace.history.push(fx);
        step = (2.0 * t).min(o.upper - o.lower);
        if change < o.tolerance {
            trace.converged = true;
            break;
        }
    }
    trace.final_value = fx;
    trace.final_xi = x;
    trace
}

/// Multi-start projected gradient ascent for every `L_a`, then the best `L_a`
/// (smallest on ties within 1e-12).
pub fn maximize_crb(
    scenario: &Scenario,
    p: &AlphabetPmf,
    family: &dyn PmfFamily,
    p_la: &[f64],
    options: &OptOptions,
) -> Result<AttackOptResult> {
    scenario.validate()?;
    check_honest_pmf(scenario, p)?;
    check_inputs(scenario, family, p_la)?;
    if !(options.lower < options.upper) {
        return Err(Error::InvalidParameter("empty xi box".into()));
    }
    let d = family.xi_dim();
    let honest_bound =
        1.0 / ((scenario.honest.len() * scenario.chain_length) as f64 * p.fisher_information()?);
    let mut starts = options.user_starts.clone();
    if let Some(bad) = starts.iter().find(|s| s.len() != d) {
        return Err(Error::InvalidParameter(format!(
            "user start has dimension {}, family has {d}",
            bad.len()
        )));
    }
    starts.extend(halton_starts(options.starts, d, options.lower, options.upper, options.seed)?);
    let obj = Objective {
        scenario,
        p,
        family,
        fim: options.fim,
    };

    if scenario.malicious.is_empty() {
        let xi = starts.first().cloned().unwrap_or_else(|| vec![0.0; d]);
        let value = obj.crb(1, p_la[0], &xi)?;
        return Ok(AttackOptResult {
            best_crb: value,
            best_xi: xi.clone(),
            best_fork: 1,
            per_fork_values: (1..=scenario.authentic_length)
                .map(|f| ForkValue {
                    fork_point: f,
                    crb: value,
                    xi: xi.clone(),
                })
                .collect(),
            trace: Vec::new(),
            no_op: true,
            honest_bound,
        });
    }

    let tasks: Vec<(usize, usize)> = (1..=scenario.authentic_length)
        .flat_map(|f| (0..starts.len()).map(move |s| (f, s)))
        .collect();
    let trace: Vec<StartTrace> = tasks
        .par_iter()
        .map(|&(f, s)| ascend(&obj, f, p_la[f - 1], &starts[s], options))
        .collect();

    let mut per_fork = Vec::new();
    for f in 1..=scenario.authentic_length {
        let best = trace
            .iter()
            .filter(|t| t.fork_point == f && t.error.is_none() && t.final_value.is_finite())
            .fold(None::<&StartTrace>, |acc, t| match acc {
                Some(a) if a.final_value >= t.final_value => Some(a),
                _ => Some(t),
            });
        if let Some(b) = best {
            per_fork.push(ForkValue {
                fork_point: f,
                crb: b.final_value,
                xi: b.final_xi.clone(),
            });
        }
    }
    if per_fork.is_empty() {
        return Err(Error::OptimizationFailed {
            trace: trace
                .iter()
                .map(|t| {
                    format!(
                        "L_a={} start={:?}: {}",
                        t.fork_point,
                        t.start,
                        t.error.as_deref().unwrap_or("no finite value")
                    )
                })
                .collect(),
        });
    }
    let mut best = &per_fork[0];
    for fv in &per_fork[1..] {
        if fv.crb > best.crb && (fv.crb - best.crb) > 1e-12 * best.crb.abs() {
            best = fv;
        }
    }
    Ok(AttackOptResult {
        best_crb: best.crb,
        best_xi: best.xi.clone(),
        best_fork: best.fork_point,
        per_fork_values: per_fork.clone(),
        trace,
        no_op: false,
        honest_bound,
    })
}

fn check_inputs(scenario: &Scenario, family: &dyn PmfFamily, p_la: &[f64]) -> Result<()> {
    if p_la.len() != scenario.authentic_length {
        return Err(Error::InvalidParameter(format!(
            "P(L_a) row has {} entries, expected L0 = {}",
            p_la.len(),
            scenario.authentic_length
        )));
    }
    if let Some(bad) = p_la.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!("P(L_a) value {bad} outside [0, 1]")));
    }
    if family.alphabet_size() != scenario.alphabet_size {
        return Err(Error::InvalidParameter(format!(
            "attack family has {} symbols, scenario alphabet has {}",
            family.alphabet_size(),
            scenario.alphabet_size
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub value: f64,
    pub xi: f64,
    pub fork_point: usize,
}

/// Exhaustive evaluation over `grid x {1..L0}` for a scalar `xi`. The first
/// maximizer in (grid, `L_a`) order wins.
pub fn grid_search_oracle(
    scenario: &Scenario,
    p: &AlphabetPmf,
    family: &dyn PmfFamily,
    p_la: &[f64],
    grid: &[f64],
    fim: &FimOptions,
) -> Result<GridResult> {
    if family.xi_dim() != 1 {
        return Err(Error::UnsupportedDimension(family.xi_dim()));
    }
    scenario.validate()?;
    check_honest_pmf(scenario, p)?;
    check_inputs(scenario, family, p_la)?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let obj = Objective {
        scenario,
        p,
        family,
        fim: *fim,
    };
    let values: Vec<Vec<f64>> = (1..=scenario.authentic_length)
        .into_par_iter()
        .map(|f| {
            grid.iter()
                .map(|&x| obj.crb(f, p_la[f - 1], &[x]).unwrap_or(f64::NEG_INFINITY))
                .collect()
        })
        .collect();
    let mut best = GridResult {
        value: f64::NEG_INFINITY,
        xi: grid[0],
        fork_point: 1,
    };
    for (f, row) in values.iter().enumerate() {
        for (g, &v) in row.iter().enumerate() {
            if v > best.value {
                best = GridResult {
                    value: v,
                    xi: grid[g],
                    fork_point: f + 1,
                };
            }
        }
    }
    if best.value == f64::NEG_INFINITY {
        return Err(Error::OptimizationFailed {
            trace: vec!["no grid point produced a finite CRB".into()],
        });
    }
    Ok(best)
}
