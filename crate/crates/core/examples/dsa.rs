//! Double-spending race: exact probabilities per fork point and a Monte Carlo
//! check.

use biot_crb::dsa::{profile, race_probability_exact, race_probability_mc, RaceSpec};

fn main() -> biot_crb::Result<()> {
    let alpha = 0.3;
    for l in 5..=10 {
        let row = profile(alpha, l, 4)?;
        println!("L = {l:>2}: {row:.5?}");
    }
    let spec = RaceSpec::for_fork(alpha, 5, 4, 3)?;
    let mc = race_probability_mc(&spec, 200_000, 42)?;
    println!(
        "fork at 3, L = 5: exact {} vs MC {} +- {}",
        race_probability_exact(&spec),
        mc.estimate,
        mc.standard_error
    );
    Ok(())
}
