use biot_crb::dsa::{profile, race_probability_dp};
use biot_crb::fisher::{crb_theta, fim_blocks, fim_blocks_with, FimOptions};
use biot_crb::model::{AlphabetPmf, AttackSpec, Scenario};
use biot_crb::relax::{lp_oracle, verify_kkt, waterfill, SensitivityTable};
use proptest::prelude::*;

fn binary(a: f64, d: f64) -> AlphabetPmf {
    AlphabetPmf::new(vec![a, 1.0 - a]).unwrap().with_dtheta(vec![d, -d]).unwrap()
}

prop_compose! {
    fn instance()(
        n in 2usize..=3,
        l in 1usize..=4,
        l0_frac in 0.0f64..1.0,
        fork_frac in 0.0f64..1.0,
        n_bad_frac in 0.0f64..1.0,
        p in 0.05f64..0.95,
        dp in -1.0f64..1.0,
        q in 0.05f64..0.95,
        dq in -1.0f64..1.0,
        dx in prop_oneof![-1.0f64..-0.01, 0.01f64..1.0],
        dsa in 0.0f64..=1.0,
    ) -> (Scenario, AttackSpec, AlphabetPmf) {
        let l0 = 1 + ((l as f64) * l0_frac) as usize % l;
        let fork = 1 + ((l0 as f64) * fork_frac) as usize % l0;
        let n_bad = 1 + ((n - 1) as f64 * n_bad_frac) as usize % (n - 1);
        let mal: Vec<usize> = (n - n_bad..n).collect();
        let s = Scenario::with_malicious(n, &mal, l, l0, 2, 0.0);
        let attack_pmf = binary(q, dq).with_dxi(vec![vec![dx], vec![-dx]]).unwrap();
        let a = AttackSpec { fork_point: fork, xi: vec![0.0], dsa_prob: dsa, attack_pmf };
        (s, a, binary(p, dp))
    }
}

prop_compose! {
    fn table()(rows in prop::collection::vec((0.0f64..4.0, 0.01f64..1.0), 1..48)) -> SensitivityTable {
        let (x, mut w): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let total: f64 = w.iter().sum();
        if total < 1.0 {
            w.iter_mut().for_each(|v| *v *= 1.25 / total);
        }
        SensitivityTable::from_parts(x, w).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn crb_is_dominated_by_honest_bound((s, a, p) in instance()) {
        let r = crb_theta(&fim_blocks(&s, &a, &p).unwrap()).unwrap();
        prop_assert!(r.crb_theta <= r.bound + 1e-9);
        prop_assert!(r.schur_gap >= -1e-12);
        if let Some(res) = r.alignment_residual {
            prop_assert!((res - r.schur_gap).abs() <= 1e-9 * r.schur_gap.abs().max(1.0));
        }
    }

    #[test]
    fn factorized_path_agrees((s, a, p) in instance()) {
        let e = crb_theta(&fim_blocks(&s, &a, &p).unwrap()).unwrap();
        let f = crb_theta(&fim_blocks_with(&s, &a, &p, &FimOptions::factorized()).unwrap()).unwrap();
        prop_assert!((e.crb_theta - f.crb_theta).abs() <= 1e-11 * e.crb_theta);
    }

    #[test]
    fn honest_information_ignores_the_attack((s, a, p) in instance(), q in 0.05f64..0.95, dsa in 0.0f64..=1.0) {
        let mut b = a.clone();
        b.attack_pmf = binary(q, 0.3).with_dxi(vec![vec![0.5], vec![-0.5]]).unwrap();
        b.dsa_prob = dsa;
        let j1 = fim_blocks(&s, &a, &p).unwrap().j_c0;
        let j2 = fim_blocks(&s, &b, &p).unwrap().j_c0;
        prop_assert!((j1 - j2).abs() <= 1e-12 * j1.abs().max(1e-300));
    }

    #[test]
    fn waterfill_is_kkt_certified_and_optimal(t in table()) {
        let s = waterfill(&t).unwrap();
        prop_assert!(verify_kkt(&t, &s, 1e-10).is_ok());
        prop_assert!(s.y_star.iter().all(|&y| (0.0..=1.0).contains(&y)));
        prop_assert!((t.budget(&s.y_star) - 1.0).abs() <= 1e-12 * t.total_weight().max(1.0));
        let (lp, _) = lp_oracle(&t).unwrap();
        prop_assert!((s.objective - lp).abs() <= 1e-9 * lp.abs().max(1.0));
    }

    #[test]
    fn waterfill_scales_with_sensitivity(t in table(), c in 0.1f64..10.0) {
        let s = waterfill(&t).unwrap();
        let scaled = SensitivityTable::from_parts(t.x.iter().map(|v| v * c).collect(), t.w.clone()).unwrap();
        let u = waterfill(&scaled).unwrap();
        prop_assert!((u.objective - c * s.objective).abs() <= 1e-10 * (c * s.objective).max(1e-12));
    }

    #[test]
    fn race_probability_is_monotone(alpha in 0.01f64..0.99, da in 0.0f64..0.01, c in 1usize..10, h in 0usize..10) {
        let p = race_probability_dp(alpha, c, h);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(race_probability_dp((alpha + da).min(1.0), c, h) >= p - 1e-15);
        prop_assert!(race_probability_dp(alpha, c + 1, h) <= p + 1e-15);
        prop_assert!(race_probability_dp(alpha, c, h + 1) >= p - 1e-15);
    }

    #[test]
    fn later_forks_succeed_more_often(alpha in 0.01f64..0.99, l0 in 1usize..8, extra in 1usize..4) {
        let row = profile(alpha, l0 + extra, l0).unwrap();
        prop_assert!(row.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    }
}
