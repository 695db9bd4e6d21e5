//! Water-filling on an explicit table, with its KKT certificate and the LP
//! cross-check.

use biot_crb::relax::{lp_oracle, verify_kkt, waterfill, Part, SensitivityTable, KKT_TOL};

fn main() -> biot_crb::Result<()> {
    let t = SensitivityTable::from_parts(vec![0.8, 0.4, 0.2, 0.1], vec![0.4; 4])?;
    let s = waterfill(&t)?;
    verify_kkt(&t, &s, KKT_TOL)?;
    let (lp, _) = lp_oracle(&t)?;
    println!("Omega     = {:?}", t.omega);
    println!("Y*        = {:?}", s.y_star);
    println!("lambda*   = {}", s.lambda_star);
    println!("S1 {:?} S2 {:?} S3 {:?}", s.members(Part::S1), s.members(Part::S2), s.members(Part::S3));
    println!("objective = {} (LP {lp}), guarantee = {}", s.objective, s.guarantee);
    Ok(())
}
