//! Synthetic chains under the hijack + double-spending model, a grid MLE of
//! `(theta, xi)`, and an MSE-versus-CRB experiment.

use crate::error::{Error, Result};
use crate::fisher::{crb_theta, fim_blocks_with, FimOptions};
use crate::model::{AlphabetPmf, AttackSpec, PmfFamily, Scenario};
use crate::numeric::CompensatedSum;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

/// One stored chain: `symbols[j * L + l]` is device `j`'s block-`l` symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainData {
    pub n_devices: usize,
    pub chain_length: usize,
    pub symbols: Vec<usize>,
    pub dsa_succeeded: bool,
    pub seed: u64,
    pub stream: u64,
}

impl ChainData {
    pub fn row(&self, j: usize) -> &[usize] {
        &self.symbols[j * self.chain_length..(j + 1) * self.chain_length]
    }

    /// Stable byte encoding: flag byte, then one byte per symbol.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.symbols.len());
        out.push(u8::from(self.dsa_succeeded));
        out.extend(self.symbols.iter().map(|&s| s as u8));
        out
    }
}

fn sampler(p: &AlphabetPmf) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(p.probs()).map_err(|e| Error::InvalidParameter(format!("cannot sample pmf: {e}")))
}

fn draw_chain(
    scenario: &Scenario,
    attack: &AttackSpec,
    honest: &WeightedIndex<f64>,
    falsified: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, bool) {
    let success = rng.random::<f64>() < attack.dsa_prob;
    let (n, len) = (scenario.n_devices, scenario.chain_length);
    let fork = attack.fork_point - 1;
    let mut symbols = vec![0; n * len];
    for j in 0..n {
        let bad = scenario.is_malicious(j);
        for l in 0..len {
            let d = if !bad || l < fork || (l < scenario.authentic_length && !success) {
                honest
            } else {
                falsified
            };
            symbols[j * len + l] = d.sample(rng);
        }
    }
    (symbols, success)
}

/// One chain from its own seed.
pub fn generate_chain(scenario: &Scenario, attack: &AttackSpec, p: &AlphabetPmf, seed: u64) -> Result<ChainData> {
    Ok(generate_batch(scenario, attack, p, 1, seed, 0)?.remove(0))
}

/// `count` chains drawn in sequence from RNG stream `stream` of `seed`.
pub fn generate_batch(
    scenario: &Scenario,
    attack: &AttackSpec,
    p: &AlphabetPmf,
    count: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<ChainData>> {
    scenario.validate()?;
    attack.validate_against(scenario)?;
    let honest = sampler(p)?;
    let falsified = sampler(&attack.attack_pmf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok((0..count)
        .map(|_| {
            let (symbols, dsa_succeeded) = draw_chain(scenario, attack, &honest, &falsified, &mut rng);
            ChainData {
                n_devices: scenario.n_devices,
                chain_length: scenario.chain_length,
                symbols,
                dsa_succeeded,
                seed,
                stream,
            }
        })
        .collect())
}

/// Known structure of the data model; `theta` and `xi` are the unknowns.
#[derive(Debug, Clone)]
pub struct SimModel {
    pub scenario: Scenario,
    pub fork_point: usize,
    pub dsa_prob: f64,
    pub honest: Arc<dyn PmfFamily>,
    pub attack: Arc<dyn PmfFamily>,
}

impl SimModel {
    pub fn attack_spec(&self, theta: f64, xi: &[f64]) -> Result<AttackSpec> {
        Ok(AttackSpec {
            fork_point: self.fork_point,
            xi: xi.to_vec(),
            dsa_prob: self.dsa_prob,
            attack_pmf: self.attack.evaluate(theta, xi)?,
        })
    }

    pub fn honest_pmf(&self, theta: f64) -> Result<AlphabetPmf> {
        self.honest.evaluate(theta, &[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub lower: f64,
    pub upper: f64,
    pub grid_points: usize,
    pub refinements: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            lower: -10.0,
            upper: 10.0,
            grid_points: 101,
            refinements: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub theta: f64,
    /// Empty when there are no malicious devices.
    pub xi: Vec<f64>,
    pub log_likelihood: f64,
    /// The maximizer sits on the search box boundary.
    pub boundary: bool,
}

/// Sufficient statistics of a batch: honest symbol totals and a histogram of
/// per-device segment counts over the malicious rows.
struct Stats {
    honest_counts: Vec<f64>,
    /// key: for each malicious device, symbol counts in segments A, B, C
    malicious: Vec<(Vec<[Vec<usize>; 3]>, f64)>,
}

fn stats(batch: &[ChainData], model: &SimModel) -> Stats {
    let s = &model.scenario;
    let q = s.alphabet_size;
    let fork = model.fork_point - 1;
    let mut honest_counts = vec![0.0; q];
    let mut hist: BTreeMap<Vec<[Vec<usize>; 3]>, f64> = BTreeMap::new();
    for chain in batch {
        for &j in &s.honest {
            for &sym in chain.row(j) {
                honest_counts[sym] += 1.0;
            }
        }
        if s.malicious.is_empty() {
            continue;
        }
        let key: Vec<[Vec<usize>; 3]> = s
            .malicious
            .iter()
            .map(|&j| {
                let mut c = [vec![0; q], vec![0; q], vec![0; q]];
                for (l, &sym) in chain.row(j).iter().enumerate() {
                    let seg = if l < fork {
                        0
                    } else if l < s.authentic_length {
                        1
                    } else {
                        2
                    };
                    c[seg][sym] += 1;
                }
                c
            })
            .collect();
        *hist.entry(key).or_insert(0.0) += 1.0;
    }
    Stats {
        honest_counts,
        malicious: hist.into_iter().collect(),
    }
}

fn log_likelihood(st: &Stats, model: &SimModel, theta: f64, xi: &[f64]) -> f64 {
    let Ok(p) = model.honest_pmf(theta) else {
        return f64::NEG_INFINITY;
    };
    let lp: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
    let mut acc = CompensatedSum::new();
    for (o, &n) in st.honest_counts.iter().enumerate() {
        if n > 0.0 {
            acc.add(n * lp[o]);
        }
    }
    if !st.malicious.is_empty() {
        let Ok(pt) = model.attack.evaluate(theta, xi) else {
            return f64::NEG_INFINITY;
        };
        let lt: Vec<f64> = pt.probs().iter().map(|v| v.ln()).collect();
        let dot = |c: &[usize], l: &[f64]| -> f64 {
            c.iter()
                .zip(l)
                .filter(|(&n, _)| n > 0)
                .map(|(&n, &v)| n as f64 * v)
                .sum()
        };
        let ps = model.dsa_prob;
        for (key, count) in &st.malicious {
            let (mut ls, mut lf) = (0.0, 0.0);
            for c in key {
                ls += dot(&c[0], &lp) + dot(&c[1], &lt) + dot(&c[2], &lt);
                lf += dot(&c[0], &lp) + dot(&c[1], &lp) + dot(&c[2], &lt);
            }
            let a = if ps > 0.0 { ps.ln() + ls } else { f64::NEG_INFINITY };
            let b = if ps < 1.0 { (1.0 - ps).ln() + lf } else { f64::NEG_INFINITY };
            let m = a.max(b);
            let mix = if m == f64::NEG_INFINITY {
                m
            } else {
                m + ((a - m).exp() + (b - m).exp()).ln()
            };
            acc.add(count * mix);
        }
    }
    let v = acc.value();
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Grid points along one axis: the full box, or a window around `center`.
fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn grid_max(
    axes: &[Vec<f64>],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> (Vec<f64>, f64, bool) {
    let total: usize = axes.iter().map(Vec::len).product();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; axes.len()];
        for k in (0..axes.len()).rev() {
            x[k] = axes[k][idx % axes[k].len()];
            idx /= axes[k].len();
        }
        x
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(|i| f(&point(i))).collect();
    let first = values[0];
    let flat = values.iter().all(|&v| v == first);
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    (point(best), values[best], flat)
}

/// Maximum-likelihood estimate of `(theta, xi)` from a batch of chains.
///
/// Coarse grid over the box, then `refinements` passes that each shrink the
/// spacing tenfold around the incumbent.
pub fn mle_estimate(batch: &[ChainData], model: &SimModel, options: &MleOptions) -> Result<MleEstimate> {
    model.scenario.validate()?;
    if batch.is_empty() {
        return Err(Error::Unidentifiable("no chains".into()));
    }
    if options.grid_points < 2 || !(options.lower < options.upper) {
        return Err(Error::InvalidParameter("MLE grid needs >= 2 points and a nonempty box".into()));
    }
    let st = stats(batch, model);
    let has_mal = !model.scenario.malicious.is_empty();
    let dim = 1 + if has_mal { model.attack.xi_dim() } else { 0 };
    let f = |x: &[f64]| log_likelihood(&st, model, x[0], &x[1..]);
    let (lo, hi) = (options.lower, options.upper);
    let coarse: Vec<Vec<f64>> = (0..dim).map(|_| axis(lo, hi, options.grid_points)).collect();
    let (mut best, mut value, flat) = grid_max(&coarse, &f);
    if flat || value == f64::NEG_INFINITY {
        return Err(Error::Unidentifiable("log-likelihood is flat over the search box".into()));
    }
    let mut spacing = (hi - lo) / (options.grid_points - 1) as f64;
    for _ in 0..options.refinements {
        let fine = spacing / 10.0;
        let axes: Vec<Vec<f64>> = best
            .iter()
            .map(|&c| {
                (-10..=10)
                    .map(|k| (c + k as f64 * fine).clamp(lo, hi))
                    .collect()
            })
            .collect();
        let (b, v, _) = grid_max(&axes, &f);
        if v > value {
            best = b;
            value = v;
        }
        spacing = fine;
    }
    // a likelihood that does not drop towards an edge has its supremum there
    let mut boundary = false;
    for k in 0..dim {
        for edge in [lo, hi] {
            let mut x = best.clone();
            x[k] = edge;
            let v = f(&x);
            if v >= value {
                best = x;
                value = v;
                boundary = true;
            }
        }
    }
    boundary |= best.iter().any(|&v| v <= lo + spacing * 0.5 || v >= hi - spacing * 0.5);
    Ok(MleEstimate {
        theta: best[0],
        xi: best[1..].to_vec(),
        log_likelihood: value,
        boundary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub trials: usize,
    pub chains_per_estimate: usize,
    pub theta_mse: f64,
    /// Sum over components of the squared `xi` errors, averaged; NaN with no
    /// malicious devices.
    pub xi_mse: f64,
    pub theta_bias: f64,
    /// CRB for `chains_per_estimate` independent chains.
    pub crb_theta: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub boundary_hits: usize,
}

/// Repeats generate -> estimate `trials` times. Trial `i` uses RNG stream `i`
/// of `seed`.
pub fn mse_experiment(
    model: &SimModel,
    theta: f64,
    xi: &[f64],
    chains_per_estimate: usize,
    trials: usize,
    seed: u64,
    options: &MleOptions,
) -> Result<MseReport> {
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    if chains_per_estimate == 0 {
        return Err(Error::InvalidParameter("need at least 1 chain per estimate".into()));
    }
    let mut scenario = model.scenario.clone();
    scenario.theta = theta;
    let p = model.honest_pmf(theta)?;
    let attack = model.attack_spec(theta, xi)?;
    let crb_single = crb_theta(&fim_blocks_with(&scenario, &attack, &p, &FimOptions::factorized())?)?.crb_theta;
    let crb = crb_single / chains_per_estimate as f64;

    let estimates: Vec<MleEstimate> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let batch = generate_batch(&scenario, &attack, &p, chains_per_estimate, seed, i as u64)?;
            mle_estimate(&batch, model, options)
        })
        .collect::<Result<_>>()?;

    let n = trials as f64;
    let sq: Vec<f64> = estimates.iter().map(|e| (e.theta - theta).powi(2)).collect();
    let theta_mse = sq.iter().sum::<f64>() / n;
    let var = sq.iter().map(|s| (s - theta_mse).powi(2)).sum::<f64>() / (n - 1.0);
    let xi_mse = if model.scenario.malicious.is_empty() {
        f64::NAN
    } else {
        estimates
            .iter()
            .map(|e| e.xi.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>()
            / n
    };
    Ok(MseReport {
        trials,
        chains_per_estimate,
        theta_mse,
        xi_mse,
        theta_bias: estimates.iter().map(|e| e.theta - theta).sum::<f64>() / n,
        crb_theta: crb,
        ratio: theta_mse / crb,
        ratio_stderr: (var / n).sqrt() / crb,
        boundary_hits: estimates.iter().filter(|e| e.boundary).count(),
    })
}
