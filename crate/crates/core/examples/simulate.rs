//! Simulate stored chains, fit theta and xi by maximum likelihood and compare
//! the empirical MSE with the CRB.

use biot_crb::model::{GaussianQuantizer, InjectionAttack, Scenario};
use biot_crb::simharness::{generate_chain, mle_estimate, mse_experiment, MleOptions, SimModel};
use std::sync::Arc;

fn main() -> biot_crb::Result<()> {
    let (theta, xi) = (0.3, [0.5]);
    let model = SimModel {
        scenario: Scenario::with_malicious(2, &[1], 6, 4, 2, theta),
        fork_point: 2,
        dsa_prob: 0.3,
        honest: Arc::new(GaussianQuantizer::one_bit(0.0, 1.0)?),
        attack: Arc::new(InjectionAttack::new(GaussianQuantizer::one_bit(0.0, 1.0)?)),
    };
    let attack = model.attack_spec(theta, &xi)?;
    let p = model.honest_pmf(theta)?;
    let chains: Vec<_> = (0..50)
        .map(|i| generate_chain(&model.scenario, &attack, &p, 1000 + i))
        .collect::<Result<_, _>>()?;
    let est = mle_estimate(&chains, &model, &MleOptions::default())?;
    println!("one fit on 50 chains: theta = {:.4}, xi = {:?}", est.theta, est.xi);

    for n in [10, 50, 200] {
        let r = mse_experiment(&model, theta, &xi, n, 100, 7, &MleOptions::default())?;
        println!(
            "{n:>4} chains: MSE {:.5}  CRB {:.5}  ratio {:.3} +- {:.3}",
            r.theta_mse, r.crb_theta, r.ratio, r.ratio_stderr
        );
    }
    Ok(())
}
