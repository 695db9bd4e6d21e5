mod common;

use biot_crb::dsa::{profile, race_probability_dp, race_probability_exact, RaceSpec};
use biot_crb::fisher::{crb_theta, fim_blocks, fim_blocks_with, FimOptions, FimPath};
use biot_crb::model::{AlphabetPmf, AttackSpec, GaussianQuantizer, InjectionAttack, PmfFamily, Scenario};
use biot_crb::outcome::{enumerate_outcomes, joint_pmf, OutcomeTables, DEFAULT_OUTCOME_CAP};
use biot_crb::relax::{guarantee_report, sensitivity_weights_collapsed, sensitivity_weights_full, waterfill};
use common::{one_bit, rel_close, Geometry};
use num_bigint::BigInt;
use num_rational::BigRational;

fn scenario_and_attack(n: usize, mal: &[usize], l: usize, l0: usize, fork: usize, dsa: f64) -> (Scenario, AttackSpec, AlphabetPmf) {
    let theta = 0.4;
    let s = Scenario::with_malicious(n, mal, l, l0, 2, theta);
    let p = GaussianQuantizer::one_bit(0.1, 1.0).unwrap().pmf_at(theta).unwrap();
    let fam = InjectionAttack::new(GaussianQuantizer::one_bit(0.6, 1.0).unwrap());
    let xi = vec![-0.3];
    let a = AttackSpec {
        fork_point: fork,
        attack_pmf: fam.evaluate(theta, &xi).unwrap(),
        xi,
        dsa_prob: dsa,
    };
    (s, a, p)
}

#[test]
fn joint_pmf_matches_brute_force_product() {
    let (s, a, p) = scenario_and_attack(3, &[1, 2], 3, 2, 2, 0.37);
    let geo = Geometry {
        n: 3,
        l: 3,
        l0: 2,
        malicious: vec![false, true, true],
        fork: 2,
        dsa: 0.37,
    };
    let pq = one_bit(0.4, 0.1);
    let qq = one_bit(0.4 - 0.3, 0.6);
    let mut total = 0.0;
    for o in enumerate_outcomes(&s, DEFAULT_OUTCOME_CAP).unwrap() {
        let lib = joint_pmf(&o, &s, &a, &p);
        let brute = geo.phi(o.symbols(), &pq, &qq);
        assert!(rel_close(lib, brute, 1e-13), "{lib} vs {brute}");
        total += lib;
    }
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn factorized_fim_equals_enumeration_up_to_two_to_the_sixteen() {
    let cases = [
        (2, vec![1], 4, 3, 2, 0.2),
        (3, vec![2], 5, 4, 4, 0.09),
        (4, vec![2, 3], 4, 2, 1, 0.6),
        (4, vec![0, 3], 4, 4, 3, 0.5),
        (2, vec![1], 8, 5, 3, 0.75),
    ];
    for (n, mal, l, l0, fork, dsa) in cases {
        assert!(n * l <= 16);
        let (s, a, p) = scenario_and_attack(n, &mal, l, l0, fork, dsa);
        let e = fim_blocks(&s, &a, &p).unwrap();
        let f = fim_blocks_with(&s, &a, &p, &FimOptions::factorized()).unwrap();
        assert_eq!(e.path, FimPath::Enumerate);
        assert_eq!(f.path, FimPath::Factorized);
        assert!(rel_close(e.j_c0, f.j_c0, 1e-12));
        assert!(rel_close(e.j_ca, f.j_ca, 1e-12));
        assert!(rel_close(e.f_a[0], f.f_a[0], 1e-12));
        assert!(rel_close(e.j_xi[0][0], f.j_xi[0][0], 1e-12));
        let (ce, cf) = (crb_theta(&e).unwrap(), crb_theta(&f).unwrap());
        assert!(rel_close(ce.crb_theta, cf.crb_theta, 1e-12));
    }
}

#[test]
fn fim_blocks_match_hand_sums_over_outcome_tables() {
    let (s, a, p) = scenario_and_attack(3, &[2], 3, 3, 2, 0.3);
    let t = OutcomeTables::build(&s, &a, &p, DEFAULT_OUTCOME_CAP).unwrap();
    let (mut jc0, mut jca, mut fa, mut jxi) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..t.phi0.len() {
        let (p0, pa) = (t.phi0[i], t.phia[i]);
        jc0 += pa / p0 * t.dphi0_dtheta[i].powi(2);
        jca += p0 / pa * t.dphia_dtheta[i].powi(2);
        fa += p0 / pa * t.dphia_dtheta[i] * t.dphia_dxi[i][0];
        jxi += p0 / pa * t.dphia_dxi[i][0].powi(2);
    }
    let b = fim_blocks(&s, &a, &p).unwrap();
    assert!(rel_close(b.j_c0, jc0, 1e-12));
    assert!(rel_close(b.j_ca, jca, 1e-12));
    assert!(rel_close(b.f_a[0], fa, 1e-12));
    assert!(rel_close(b.j_xi[0][0], jxi, 1e-12));
    assert!((t.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn honest_only_reference_value() {
    // threshold 0, theta 0, L = 3, two honest devices: J = 6 * 2 / pi
    let s = Scenario::with_malicious(2, &[], 3, 3, 2, 0.0);
    let p = GaussianQuantizer::one_bit(0.0, 1.0).unwrap().pmf_at(0.0).unwrap();
    let fam = InjectionAttack::new(GaussianQuantizer::one_bit(0.0, 1.0).unwrap());
    let a = AttackSpec {
        fork_point: 1,
        xi: vec![0.0],
        dsa_prob: 0.0,
        attack_pmf: fam.evaluate(0.0, &[0.0]).unwrap(),
    };
    let b = fim_blocks(&s, &a, &p).unwrap();
    assert!(rel_close(b.j_c0, 3.819718634205488, 1e-14));
    let r = crb_theta(&b).unwrap();
    assert!(rel_close(r.crb_theta, 0.2617993877991494, 1e-14));
    assert_eq!(r.crb_theta, r.bound);
}

#[test]
fn collapsed_relaxation_equals_full_table() {
    for (n, mal, l) in [(2, vec![1], 3), (3, vec![2], 4), (3, vec![1, 2], 3), (4, vec![3], 3)] {
        let s = Scenario::with_malicious(n, &mal, l, 2, 2, 2.0);
        let p = GaussianQuantizer::one_bit(0.1, 1.0).unwrap().pmf_at(2.0).unwrap();
        let full = waterfill(&sensitivity_weights_full(&s, &p, 1 << 16).unwrap()).unwrap();
        let coll = waterfill(&sensitivity_weights_collapsed(&s, &p, 1 << 16).unwrap()).unwrap();
        assert!(rel_close(full.objective, coll.objective, 1e-10), "{} vs {}", full.objective, coll.objective);
        assert!(rel_close(full.lambda_star, coll.lambda_star, 1e-10));
        let rf = guarantee_report(&s, &p, None, 1 << 16, false).unwrap();
        let rc = guarantee_report(&s, &p, None, 1 << 16, true).unwrap();
        assert!(rel_close(rf.guarantee, rc.guarantee, 1e-10));
        assert!(rc.guarantee >= rc.honest_bound * (1.0 - 1e-12));
    }
}

#[test]
fn race_dp_in_exact_rationals_matches_closed_form() {
    // sum_{j<h} C(c-1+j, j) a^c (1-a)^j, written out independently
    let a = BigRational::new(BigInt::from(3), BigInt::from(10));
    let b = BigRational::from_integer(BigInt::from(1)) - &a;
    for c in 1..=8usize {
        for h in 0..=8usize {
            let mut want = BigRational::from_integer(BigInt::from(0));
            for j in 0..h {
                let mut binom = BigInt::from(1);
                for k in 0..j {
                    binom = binom * BigInt::from(c + k) / BigInt::from(k + 1);
                }
                let mut term = BigRational::from_integer(binom);
                for _ in 0..c {
                    term *= &a;
                }
                for _ in 0..j {
                    term *= &b;
                }
                want += term;
            }
            assert_eq!(race_probability_dp(a.clone(), c, h), want, "c = {c}, h = {h}");
        }
    }
}

#[test]
fn race_reference_row_and_values() {
    let row = profile(0.3, 5, 4).unwrap();
    for (g, w) in row.iter().zip([0.00243, 0.0081, 0.027, 0.09]) {
        assert!((g - w).abs() < 1e-12);
    }
    let v = race_probability_exact(&RaceSpec::new(0.3, 3, 2).unwrap());
    assert!((v - 0.0837).abs() < 1e-12);
}
