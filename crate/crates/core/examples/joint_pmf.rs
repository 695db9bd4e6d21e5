//! Enumerate every stored chain of a tiny network and check the joint pmf.

use biot_crb::model::{AttackSpec, GaussianQuantizer, InjectionAttack, PmfFamily, Scenario};
use biot_crb::outcome::{enumerate_outcomes, honest_factor, joint_pmf, malicious_factor, DEFAULT_OUTCOME_CAP};

fn main() -> biot_crb::Result<()> {
    let theta = 1.0;
    // device 0 honest, device 1 hijacked; L = 3, forked at block 2 of L0 = 2
    let s = Scenario::with_malicious(2, &[1], 3, 2, 2, theta);
    let p = GaussianQuantizer::one_bit(0.5, 1.0)?.pmf_at(theta)?;
    let family = InjectionAttack::new(GaussianQuantizer::one_bit(0.5, 1.0)?);
    let attack = AttackSpec {
        fork_point: 2,
        xi: vec![1.5],
        dsa_prob: 0.3,
        attack_pmf: family.evaluate(theta, &[1.5])?,
    };
    attack.validate_against(&s)?;

    let mut total = 0.0;
    println!("{:<8} {:>10} {:>10} {:>10}", "chain", "phi0", "phia", "phi");
    for o in enumerate_outcomes(&s, DEFAULT_OUTCOME_CAP)? {
        let (h, m) = (honest_factor(&o, &s, &p), malicious_factor(&o, &s, &attack, &p));
        let phi = joint_pmf(&o, &s, &attack, &p);
        total += phi;
        let label: String = o.symbols().iter().map(|d| char::from(b'0' + *d as u8)).collect();
        println!("{label:<8} {h:>10.6} {m:>10.6} {phi:>10.6}");
    }
    println!("total mass = {total}");
    Ok(())
}
