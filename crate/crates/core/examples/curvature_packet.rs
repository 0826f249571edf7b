//! Ricci, scalar and traceless-Ricci data at a point of each built-in metric.

use hawking_lab::manifold::{curvature_packet, MetricField, Polynomial};

fn main() -> hawking_lab::Result<()> {
    let metrics = [
        ("euclidean", MetricField::euclidean(), [0.0, 0.0, 0.0]),
        ("round sphere", MetricField::round_sphere(1.0), [0.2, 0.1, 0.0]),
        ("hyperbolic", MetricField::hyperbolic(1.0), [0.1, 0.0, 0.3]),
        ("schwarzschild", MetricField::schwarzschild(1.0), [0.0, 0.0, 4.0]),
        ("conformal", MetricField::conformal(Polynomial::monomial(0.1, [2, 0, 0])), [0.3, 0.0, 0.0]),
    ];
    for (name, m, p) in &metrics {
        let cp = curvature_packet(m, p)?;
        println!("{name:<14} Sc = {:>10.6}  |S|² = {:.6e}  ΔSc = {:.6e}", cp.scalar, cp.traceless_norm_sq, cp.scalar_laplacian);
    }
    Ok(())
}
