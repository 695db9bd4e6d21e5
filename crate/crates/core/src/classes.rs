//! Sufficient-statistic classes of outcomes.
//!
//! `phi_0` depends on an outcome only through the symbol counts over honest
//! coordinates. `phi_a` is symmetric in the malicious devices and, per device,
//! depends only on the symbol counts inside each of the three segments
//! (before the fork, fork..L0, after L0). Grouping outcomes by these
//! statistics gives exact sums over `R` at a fraction of the cost.

use crate::error::{Error, Result};
use crate::model::AlphabetPmf;
use crate::numeric::{for_each_composition, multinomial};
use crate::outcome::{FactorTable, Jet, Segments, SymbolFactor};

/// Per-device symbol counts in each segment and the number of rows sharing them.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub counts: [Vec<usize>; 3],
    pub multiplicity: f64,
}

/// Unordered collections of device profiles covering all malicious devices.
#[derive(Debug, Clone)]
pub struct MaliciousClasses {
    pub profiles: Vec<DeviceProfile>,
    /// Sorted profile indices (one per malicious device) and the number of
    /// malicious patterns in the class.
    pub classes: Vec<(Vec<usize>, f64)>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl MaliciousClasses {
    pub(crate) fn new(alphabet: usize, seg: Segments, devices: usize, cap: u64) -> Result<Self> {
        let [a, b, c] = seg.lengths();
        let mut profiles = Vec::new();
        for_each_composition(a, alphabet, |ca| {
            for_each_composition(b, alphabet, |cb| {
                for_each_composition(c, alphabet, |cc| {
                    profiles.push(DeviceProfile {
                        counts: [ca.to_vec(), cb.to_vec(), cc.to_vec()],
                        multiplicity: multinomial(ca) * multinomial(cb) * multinomial(cc),
                    });
                });
            });
        });
        let k = profiles.len();
        let n_classes = if devices == 0 { 1 } else { binomial(k + devices - 1, devices) };
        if n_classes > cap as u128 {
            return Err(Error::OutcomeSpaceTooLarge {
                required: n_classes,
                cap,
            });
        }
        let mut classes = Vec::with_capacity(n_classes as usize);
        let mut idx = vec![0usize; devices];
        let device_fact = factorial(devices);
        loop {
            // multiplicity: arrangements of the multiset times rows per profile
            let mut runs = Vec::new();
            let mut mult = 1.0;
            let mut i = 0;
            while i < devices {
                let mut j = i;
                while j < devices && idx[j] == idx[i] {
                    j += 1;
                }
                runs.push(j - i);
                i = j;
            }
            for &pi in &idx {
                mult *= profiles[pi].multiplicity;
            }
            let arrangements = device_fact / runs.iter().map(|&r| factorial(r)).product::<f64>();
            classes.push((idx.clone(), mult * arrangements));

            // next nondecreasing sequence
            let mut pos = devices;
            loop {
                if pos == 0 {
                    return Ok(Self { profiles, classes });
                }
                pos -= 1;
                if idx[pos] + 1 < k {
                    let v = idx[pos] + 1;
                    for slot in &mut idx[pos..] {
                        *slot = v;
                    }
                    break;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// `phi_a` with partials for every class.
    pub(crate) fn evaluate(&self, table: &FactorTable, dsa_prob: f64) -> Vec<Jet> {
        let d = table.xi_dim;
        let branch: Vec<(Jet, Jet)> = self
            .profiles
            .iter()
            .map(|prof| {
                let mut success = Jet::one(d);
                let mut failure = Jet::one(d);
                for (o, &n) in prof.counts[0].iter().enumerate() {
                    pow_into(&mut success, &table.honest[o], n);
                    pow_into(&mut failure, &table.honest[o], n);
                }
                for (o, &n) in prof.counts[1].iter().enumerate() {
                    pow_into(&mut success, &table.attack[o], n);
                    pow_into(&mut failure, &table.honest[o], n);
                }
                for (o, &n) in prof.counts[2].iter().enumerate() {
                    pow_into(&mut success, &table.attack[o], n);
                    pow_into(&mut failure, &table.attack[o], n);
                }
                (success, failure)
            })
            .collect();
        self.classes
            .iter()
            .map(|(members, _)| {
                let mut s = Jet::one(d);
                let mut f = Jet::one(d);
                for &m in members {
                    s.mul_jet(&branch[m].0);
                    f.mul_jet(&branch[m].1);
                }
                Jet::mix(dsa_prob, &s, 1.0 - dsa_prob, &f)
            })
            .collect()
    }
}

fn pow_into(acc: &mut Jet, f: &SymbolFactor, n: usize) {
    for _ in 0..n {
        acc.mul_factor(f);
    }
}

/// Honest-coordinate symbol-count classes: `phi_0`, its theta derivative and
/// the number of honest patterns with those counts.
#[derive(Debug, Clone, PartialEq)]
pub struct HonestClass {
    pub counts: Vec<usize>,
    pub phi0: f64,
    pub dphi0_dtheta: f64,
    pub multiplicity: f64,
}

pub(crate) fn honest_classes(p: &AlphabetPmf, coordinates: usize, cap: u64) -> Result<Vec<HonestClass>> {
    let n = binomial(coordinates + p.len() - 1, p.len() - 1);
    if n > cap as u128 {
        return Err(Error::OutcomeSpaceTooLarge { required: n, cap });
    }
    let table = FactorTable::honest_only(p);
    let mut out = Vec::with_capacity(n as usize);
    for_each_composition(coordinates, p.len(), |counts| {
        let mut jet = Jet::one(0);
        for (o, &k) in counts.iter().enumerate() {
            pow_into(&mut jet, &table.honest[o], k);
        }
        out.push(HonestClass {
            counts: counts.to_vec(),
            phi0: jet.v,
            dphi0_dtheta: jet.dt,
            multiplicity: multinomial(counts),
        });
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scenario;

    #[test]
    fn class_multiplicities_cover_all_patterns() {
        let s = Scenario::with_malicious(4, &[1, 2, 3], 4, 3, 2, 0.0);
        for fork in 1..=3 {
            let seg = Segments::new(&s, fork);
            let cls = MaliciousClasses::new(2, seg, 3, u64::MAX).unwrap();
            let total: f64 = cls.classes.iter().map(|c| c.1).sum();
            assert_eq!(total, 2f64.powi(12));
        }
        let seg = Segments::new(&s, 2);
        let cls = MaliciousClasses::new(3, seg, 2, u64::MAX).unwrap();
        let total: f64 = cls.classes.iter().map(|c| c.1).sum();
        assert_eq!(total, 3f64.powi(8));
    }

    #[test]
    fn honest_classes_sum_to_one() {
        let p = AlphabetPmf::new(vec![0.2, 0.5, 0.3])
            .unwrap()
            .with_dtheta(vec![-0.1, 0.04, 0.06])
            .unwrap();
        let cls = honest_classes(&p, 6, u64::MAX).unwrap();
        let mass: f64 = cls.iter().map(|c| c.phi0 * c.multiplicity).sum();
        let dmass: f64 = cls.iter().map(|c| c.dphi0_dtheta * c.multiplicity).sum();
        assert!((mass - 1.0).abs() < 1e-14);
        assert!(dmass.abs() < 1e-14);
        let count: f64 = cls.iter().map(|c| c.multiplicity).sum();
        assert_eq!(count, 729.0);
    }

    #[test]
    fn class_cap_enforced() {
        let s = Scenario::with_malicious(6, &[1, 2, 3, 4, 5], 5, 4, 2, 0.0);
        let seg = Segments::new(&s, 3);
        assert!(matches!(
            MaliciousClasses::new(2, seg, 5, 1000),
            Err(Error::OutcomeSpaceTooLarge { .. })
        ));
    }
}
