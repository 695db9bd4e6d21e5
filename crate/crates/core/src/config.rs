//! TOML run configuration.
//!
//! ```toml
//! seed = 7                      # optional
//!
//! [scenario]
//! n_devices = 3
//! malicious = [2]               # zero-based device indices
//! chain_length = 5              # L
//! authentic_length = 4          # L0
//! theta = 2.0
//!
//! [honest]                      # one-bit or multi-level Gaussian quantizer
//! thresholds = [0.1]
//! noise_std = 1.0
//! pmf = [0.02871656, 0.97128344]  # optional tabulated pmf; partials still
//!                                 # come from the quantizer unless `dtheta`
//!
//! [attack]
//! family = "injection"          # or "shift-scale"
//! thresholds = [3.0]
//! xi = [2.5]
//! fork_point = 4                # L_a, one-based
//! pmf = [0.06680720, 0.93319280]  # optional tabulated attack pmf
//!
//! [dsa]
//! p_la = [0.00243, 0.0081, 0.027, 0.09]  # or `alpha = 0.3`
//! ```
//!
//! Further optional tables: `[optimizer]`, `[simulation]`, `[waterfill]`,
//! `[sweep]`. A `[manifest]` table written by the command-line tool is
//! accepted and ignored, so a manifest can be fed back as a config.

use crate::attackopt::OptOptions;
use crate::dsa;
use crate::error::{Error, Result};
use crate::fisher::FimOptions;
use crate::model::{AlphabetPmf, AttackSpec, GaussianQuantizer, InjectionAttack, PmfFamily, Scenario, ShiftScaleAttack};
use crate::simharness::{MleOptions, SimModel};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub honest: HonestConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub dsa: DsaConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waterfill: Option<WaterfillConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_devices: usize,
    #[serde(default)]
    pub malicious: Vec<usize>,
    pub chain_length: usize,
    pub authentic_length: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HonestConfig {
    #[serde(default = "zero_threshold")]
    pub thresholds: Vec<f64>,
    #[serde(default = "unit")]
    pub noise_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtheta: Option<Vec<f64>>,
}

impl Default for HonestConfig {
    fn default() -> Self {
        Self {
            thresholds: zero_threshold(),
            noise_std: 1.0,
            pmf: None,
            dtheta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Injection,
    ShiftScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default = "injection")]
    pub family: FamilyKind,
    #[serde(default = "zero_threshold")]
    pub thresholds: Vec<f64>,
    #[serde(default = "unit")]
    pub noise_std: f64,
    #[serde(default = "zero_xi")]
    pub xi: Vec<f64>,
    #[serde(default = "one")]
    pub fork_point: usize,
    /// Overrides the `P(L_a)` row for this fork point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsa_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            family: FamilyKind::Injection,
            thresholds: zero_threshold(),
            noise_std: 1.0,
            xi: zero_xi(),
            fork_point: 1,
            dsa_prob: None,
            pmf: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsaConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_la: Option<Vec<f64>>,
    /// Monte Carlo trials reported next to the exact race probability.
    #[serde(default)]
    pub mc_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "starts")]
    pub starts: usize,
    #[serde(default = "neg_ten")]
    pub lower: f64,
    #[serde(default = "ten")]
    pub upper: f64,
    #[serde(default = "iterations")]
    pub max_iterations: usize,
    #[serde(default = "tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub user_starts: Vec<Vec<f64>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: starts(),
            lower: -10.0,
            upper: 10.0,
            max_iterations: iterations(),
            tolerance: tolerance(),
            user_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "sim_trials")]
    pub trials: usize,
    #[serde(default = "sim_chains")]
    pub chains_per_estimate: Vec<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            trials: sim_trials(),
            chains_per_estimate: sim_chains(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterfillConfig {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Chain lengths of the `L` sweep and their `P(L_a)` rows.
    pub chain_lengths: Vec<usize>,
    pub p_la_rows: Vec<Vec<f64>>,
    /// `|C0|` values with one malicious device.
    #[serde(default)]
    pub honest_counts: Vec<usize>,
    /// Device total for the mixed sweep, and its `|C0|` values.
    #[serde(default)]
    pub fixed_devices: usize,
    #[serde(default)]
    pub fixed_honest_counts: Vec<usize>,
}

impl SweepConfig {
    pub fn row_for(&self, chain_length: usize) -> Result<&[f64]> {
        if self.chain_lengths.len() != self.p_la_rows.len() {
            return Err(Error::Config("sweep: chain_lengths and p_la_rows differ in length".into()));
        }
        self.chain_lengths
            .iter()
            .position(|&l| l == chain_length)
            .map(|i| self.p_la_rows[i].as_slice())
            .ok_or_else(|| Error::Config(format!("sweep: no P(L_a) row for L = {chain_length}")))
    }
}

fn zero_threshold() -> Vec<f64> {
    vec![0.0]
}
fn zero_xi() -> Vec<f64> {
    vec![0.0]
}
fn unit() -> f64 {
    1.0
}
fn one() -> usize {
    1
}
fn injection() -> FamilyKind {
    FamilyKind::Injection
}
fn starts() -> usize {
    16
}
fn neg_ten() -> f64 {
    -10.0
}
fn ten() -> f64 {
    10.0
}
fn iterations() -> usize {
    500
}
fn tolerance() -> f64 {
    1e-8
}
fn sim_trials() -> usize {
    200
}
fn sim_chains() -> Vec<usize> {
    vec![10, 50, 200]
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn honest_quantizer(&self) -> Result<GaussianQuantizer> {
        GaussianQuantizer::new(self.honest.thresholds.clone(), self.honest.noise_std)
    }

    pub fn alphabet_size(&self) -> usize {
        self.honest.thresholds.len() + 1
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.scenario;
        let scenario = Scenario::with_malicious(
            s.n_devices,
            &s.malicious,
            s.chain_length,
            s.authentic_length,
            self.alphabet_size(),
            s.theta,
        );
        if scenario.malicious.len() != s.malicious.len() {
            return Err(Error::InvalidPartition("duplicate malicious device index".into()));
        }
        if let Some(&j) = s.malicious.iter().find(|&&j| j >= s.n_devices) {
            return Err(Error::InvalidPartition(format!(
                "malicious device {j} out of range for {} devices",
                s.n_devices
            )));
        }
        scenario.validate()?;
        Ok(scenario)
    }

    /// Honest pmf at `theta`: the tabulated values when given, otherwise the
    /// quantizer. Partials come from `dtheta` or the quantizer.
    pub fn honest_pmf(&self, theta: f64) -> Result<AlphabetPmf> {
        let q = self.honest_quantizer()?.pmf_at(theta)?;
        let Some(probs) = &self.honest.pmf else {
            return match &self.honest.dtheta {
                Some(d) => AlphabetPmf::new(q.probs().to_vec())?.with_dtheta(d.clone()),
                None => Ok(q),
            };
        };
        let dtheta = match &self.honest.dtheta {
            Some(d) => d.clone(),
            None => q.require_dtheta("honest quantizer")?.to_vec(),
        };
        AlphabetPmf::new(probs.clone())?.with_dtheta(dtheta)
    }

    pub fn attack_family(&self) -> Result<Arc<dyn PmfFamily>> {
        let q = GaussianQuantizer::new(self.attack.thresholds.clone(), self.attack.noise_std)?;
        if q.thresholds().len() + 1 != self.alphabet_size() {
            return Err(Error::InvalidParameter(format!(
                "attack quantizer has {} symbols, honest has {}",
                q.thresholds().len() + 1,
                self.alphabet_size()
            )));
        }
        Ok(match self.attack.family {
            FamilyKind::Injection => Arc::new(InjectionAttack::new(q)),
            FamilyKind::ShiftScale => Arc::new(ShiftScaleAttack::new(q)),
        })
    }

    /// `P(L_a)` for `L_a = 1..=L0`: the explicit row, else the race model.
    pub fn p_la_row(&self, scenario: &Scenario) -> Result<Vec<f64>> {
        if let Some(row) = &self.dsa.p_la {
            if row.len() != scenario.authentic_length {
                return Err(Error::InvalidParameter(format!(
                    "p_la has {} entries, expected L0 = {}",
                    row.len(),
                    scenario.authentic_length
                )));
            }
            return Ok(row.clone());
        }
        if let Some(alpha) = self.dsa.alpha {
            return dsa::success_profile(scenario, alpha);
        }
        Err(Error::Config("need dsa.p_la or dsa.alpha".into()))
    }

    /// Attack at the configured `xi` and fork point.
    pub fn attack_spec(&self, scenario: &Scenario) -> Result<AttackSpec> {
        let family = self.attack_family()?;
        if self.attack.xi.len() != family.xi_dim() {
            return Err(Error::InvalidParameter(format!(
                "xi has dimension {}, family expects {}",
                self.attack.xi.len(),
                family.xi_dim()
            )));
        }
        let model = family.evaluate(scenario.theta, &self.attack.xi)?;
        let attack_pmf = match &self.attack.pmf {
            Some(probs) => AlphabetPmf::new(probs.clone())?
                .with_dtheta(model.require_dtheta("attack family")?.to_vec())?
                .with_dxi(model.require_dxi("attack family")?.to_vec())?,
            None => model,
        };
        let fork = self.attack.fork_point;
        let dsa_prob = match self.attack.dsa_prob {
            Some(v) => v,
            None => {
                let row = self.p_la_row(scenario)?;
                *row.get(fork.wrapping_sub(1)).ok_or(Error::InvalidFork {
                    fork_point: fork,
                    authentic_length: scenario.authentic_length,
                })?
            }
        };
        let attack = AttackSpec {
            fork_point: fork,
            xi: self.attack.xi.clone(),
            dsa_prob,
            attack_pmf,
        };
        attack.validate_against(scenario)?;
        Ok(attack)
    }

    pub fn opt_options(&self, seed: u64) -> OptOptions {
        OptOptions {
            starts: self.optimizer.starts,
            lower: self.optimizer.lower,
            upper: self.optimizer.upper,
            max_iterations: self.optimizer.max_iterations,
            tolerance: self.optimizer.tolerance,
            seed,
            user_starts: self.optimizer.user_starts.clone(),
            fim: FimOptions::factorized(),
            ..OptOptions::default()
        }
    }

    pub fn sim_model(&self, scenario: &Scenario, dsa_prob: f64) -> Result<SimModel> {
        Ok(SimModel {
            scenario: scenario.clone(),
            fork_point: self.attack.fork_point,
            dsa_prob,
            honest: Arc::new(self.honest_quantizer()?),
            attack: self.attack_family()?,
        })
    }

    pub fn mle_options(&self) -> MleOptions {
        MleOptions::default()
    }
}
