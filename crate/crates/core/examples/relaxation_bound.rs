//! Relaxation guarantee for the reference scenario, plus the water level
//! trace of a small full table.

use biot_crb::cli::REFERENCE_CONFIG;
use biot_crb::config::Config;
use biot_crb::model::Scenario;
use biot_crb::relax::{guarantee_report, sensitivity_weights_full, water_level_trace, Level};

fn main() -> biot_crb::Result<()> {
    let cfg = Config::parse(REFERENCE_CONFIG)?;
    let s = cfg.scenario()?;
    let p = cfg.honest_pmf(s.theta)?;
    let r = guarantee_report(&s, &p, Some(&cfg.p_la_row(&s)?), 1 << 24, true)?;
    println!(
        "guarantee = {}  objective = {}  lambda* = {}  1/J_C0 = {}  ({} collapsed entries)",
        r.guarantee, r.objective, r.lambda_star, r.honest_bound, r.table_entries
    );

    let small = Scenario::with_malicious(2, &[1], 2, 2, 2, s.theta);
    let t = sensitivity_weights_full(&small, &p, 1 << 16)?;
    for st in water_level_trace(&t)? {
        let level = match st.level {
            Level::At(v) => format!("= {v:.6}"),
            Level::Between(a, b) => format!("in ({a:.6}, {b:.6})"),
        };
        println!(
            "lambda {level:<28} |S1| = {:<3} |S2| = {:<3} |S3| = {:<3} feasible = {}",
            st.s1.len(),
            st.s2.len(),
            st.s3.len(),
            st.feasible
        );
    }
    Ok(())
}
