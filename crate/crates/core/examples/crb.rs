//! Fisher blocks and the CRB of theta for the bundled reference scenario.

use biot_crb::cli::REFERENCE_CONFIG;
use biot_crb::config::Config;
use biot_crb::fisher::{crb_theta, fim_blocks, fim_blocks_with, FimOptions};

fn main() -> biot_crb::Result<()> {
    let cfg = Config::parse(REFERENCE_CONFIG)?;
    let s = cfg.scenario()?;
    let p = cfg.honest_pmf(s.theta)?;
    let attack = cfg.attack_spec(&s)?;

    let exact = fim_blocks(&s, &attack, &p)?;
    let fast = fim_blocks_with(&s, &attack, &p, &FimOptions::factorized())?;
    println!("J_C0 = {}  J_Ca = {}  f_a = {:?}  J_xi = {:?}", exact.j_c0, exact.j_ca, exact.f_a, exact.j_xi);
    println!("factorized J_Ca = {} (enumerated {})", fast.j_ca, exact.j_ca);

    let r = crb_theta(&exact)?;
    println!("CRB_theta          = {}", r.crb_theta);
    println!("1/J_C0             = {}", r.bound);
    println!("Schur gap          = {}", r.schur_gap);
    println!("alignment residual = {:?}", r.alignment_residual);
    Ok(())
}
