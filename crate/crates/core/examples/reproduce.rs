//! Run the three sweeps on the bundled reference scenario and print CSV.

use biot_crb::cli::{cmd_reproduce, Context, Figure};

fn main() -> biot_crb::Result<()> {
    let ctx = Context::load(None, Some(0), None)?;
    for fig in [Figure::Fig2, Figure::Fig3, Figure::Fig4] {
        println!("# {fig:?}");
        print!("{}", cmd_reproduce(&ctx, fig)?.to_csv()?);
    }
    Ok(())
}
