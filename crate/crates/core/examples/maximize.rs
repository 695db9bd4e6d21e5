//! Worst-case attack: maximize the CRB over xi and the fork point, then check
//! against a brute-force grid.

use biot_crb::attackopt::{grid_search_oracle, maximize_crb, OptOptions};
use biot_crb::cli::REFERENCE_CONFIG;
use biot_crb::config::Config;
use biot_crb::fisher::FimOptions;

fn main() -> biot_crb::Result<()> {
    let cfg = Config::parse(REFERENCE_CONFIG)?;
    let s = cfg.scenario()?;
    let p = cfg.honest_pmf(s.theta)?;
    let family = cfg.attack_family()?;
    let row = cfg.p_la_row(&s)?;

    let opts = OptOptions { starts: 8, seed: 3, ..OptOptions::default() };
    let best = maximize_crb(&s, &p, family.as_ref(), &row, &opts)?;
    for f in &best.per_fork_values {
        println!("L_a = {}  P = {:<8} CRB = {:.9}  xi = {:?}", f.fork_point, row[f.fork_point - 1], f.crb, f.xi);
    }
    println!("best: L_a = {}, xi = {:?}, CRB = {}", best.best_fork, best.best_xi, best.best_crb);
    println!("honest-only bound 1/J_C0 = {}", best.honest_bound);

    let grid: Vec<f64> = (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect();
    let g = grid_search_oracle(&s, &p, family.as_ref(), &row, &grid, &FimOptions::factorized())?;
    println!("grid check: L_a = {}, xi = {}, CRB = {}", g.fork_point, g.xi, g.value);
    Ok(())
}
