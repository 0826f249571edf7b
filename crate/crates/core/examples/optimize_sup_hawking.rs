//! Area-constrained maximisation of m_H over l = 2..4 perturbations.

use std::f64::consts::PI;

use hawking_lab::manifold::MetricField;
use hawking_lab::optimizer::{closed_form_hawking, maximize_hawking, OptimizeConfig};

fn main() -> hawking_lab::Result<()> {
    let m = MetricField::schwarzschild(1.0);
    let p = [0.0, 0.0, 4.0];
    let cfg = OptimizeConfig::default();
    let target = 4.0 * PI * 0.05f64.powi(2);
    let r = maximize_hawking(&m, &p, target, &cfg)?;
    println!("{}: m_H* = {:.10e} after {} iterations ({:?})", r.label, r.m_h_star, r.iterations, r.stop);
    println!("closed-form perturbation m_H = {:.10e}", closed_form_hawking(&m, &p, target, &cfg)?);
    println!("w* l=2 {:?}", r.w_star.degree(2));
    println!("least-squares λ {:.4e}, EL residual {:.3e}", r.lambda, r.el_residual_norm);
    Ok(())
}
