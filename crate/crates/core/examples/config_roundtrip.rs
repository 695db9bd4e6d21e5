//! Load a TOML configuration, tweak it in code and write it back.

use biot_crb::cli::REFERENCE_CONFIG;
use biot_crb::config::Config;

fn main() -> biot_crb::Result<()> {
    let mut cfg = Config::parse(REFERENCE_CONFIG)?;
    cfg.scenario.chain_length = 6;
    cfg.dsa.p_la = None;
    let s = cfg.scenario()?;
    // without an explicit row the success probabilities come from dsa.alpha
    println!("P(L_a) for L = 6: {:?}", cfg.p_la_row(&s)?);
    print!("{}", cfg.to_toml()?);
    Ok(())
}
