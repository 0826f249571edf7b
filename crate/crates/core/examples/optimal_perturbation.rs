//! Closed-form optimal perturbation at a Schwarzschild point and its PDE residual.

use hawking_lab::harmonics::{optimal_perturbation, pde_residual, SphericalBasis};
use hawking_lab::manifold::{curvature_packet, MetricField};
use hawking_lab::surface::build_grid;

fn main() -> hawking_lab::Result<()> {
    let cp = curvature_packet(&MetricField::schwarzschild(1.0), &[0.0, 0.0, 4.0])?;
    let op = optimal_perturbation(&cp, 0.05)?;
    let basis = SphericalBasis::new(&build_grid(16, 32)?, 8)?;
    for l in 0..=2 {
        println!("l = {l}: {:?}", op.wbar.degree(l));
    }
    println!("λ = {:.6e}", op.lambda);
    println!("spectral residual {:.3e}", pde_residual(&cp, &op.wbar, &basis)?);
    println!("w at ρ = {}: l=2 {:?}", op.rho, op.w_of_rho().degree(2));
    Ok(())
}
