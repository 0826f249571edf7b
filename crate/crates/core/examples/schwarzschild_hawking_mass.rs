//! Coordinate spheres of spatial Schwarzschild carry Hawking mass exactly m.

use hawking_lab::geodesics::{sample_embedding, CoordinateSphere, JetOrder};
use hawking_lab::manifold::MetricField;
use hawking_lab::surface::{build_grid, extrinsic_geometry, hawking_mass};

fn main() -> hawking_lab::Result<()> {
    let m = MetricField::schwarzschild(1.0);
    let g = build_grid(16, 32)?;
    for r in [2.5, 3.0, 4.0, 8.0, 16.0] {
        let sample = sample_embedding(&CoordinateSphere { center: [0.0; 3], radius: r }, &g, JetOrder::Second)?;
        let s = extrinsic_geometry(&m, &sample, &g)?;
        println!("r = {r:>5}: m_H − 1 = {:+.3e}", hawking_mass(&s, 0)?.hawking - 1.0);
    }
    Ok(())
}
