//! Fits m_H on a radius ladder and compares the ρ³, ρ⁵ coefficients with the curvature prediction.

use hawking_lab::expansion::{compare_report, fit_coefficients, predicted_coefficients, radius_ladder, SphereMode, Tolerances};
use hawking_lab::geodesics::GeodesicConfig;
use hawking_lab::manifold::{curvature_packet, MetricField};
use hawking_lab::surface::build_grid;

fn main() -> hawking_lab::Result<()> {
    let g = build_grid(16, 32)?;
    let cfg = GeodesicConfig::precise();
    for (name, m, p, rho0) in [
        ("round sphere", MetricField::round_sphere(1.0), [0.1, 0.0, 0.2], 0.2),
        ("schwarzschild", MetricField::schwarzschild(1.0), [0.0, 0.0, 4.0], 0.4),
    ] {
        let cp = curvature_packet(&m, &p)?;
        for mode in [SphereMode::Optimal, SphereMode::Unperturbed] {
            let ladder = radius_ladder(&m, &p, mode, rho0, 6, &g, 0, &cfg)?;
            let fit = fit_coefficients(&ladder.radii(), &ladder.masses())?;
            let c = compare_report(&fit, &predicted_coefficients(&cp, mode, 0), &Tolerances::default());
            println!(
                "{name:<14} {mode:?}: c3 {:+.6e} (pred {:+.6e})  c5 {:+.6e} (pred {:+.6e})  pass {}",
                fit.c3, c.c3.predicted, fit.c5, c.c5.predicted, c.pass
            );
        }
    }
    Ok(())
}
