//! Small-sphere lower bound for the Bartnik mass at a Schwarzschild point.

use hawking_lab::expansion::bartnik_lower_bound;
use hawking_lab::manifold::{curvature_packet, MetricField};

fn main() -> hawking_lab::Result<()> {
    let cp = curvature_packet(&MetricField::schwarzschild(1.0), &[0.0, 0.0, 4.0])?;
    for rho in [0.05, 0.1, 0.2, 0.4] {
        let b = bartnik_lower_bound(&cp, rho, 1.0)?;
        println!("ρ = {rho}: bound {:.6e} (leading {:.3e}, next {:.3e})", b.bound, b.leading, b.next);
    }
    match bartnik_lower_bound(&cp, 0.6, 1.0) {
        Err(e) => println!("ρ = 0.6: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
