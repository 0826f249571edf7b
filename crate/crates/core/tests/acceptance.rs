//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hawking_lab::expansion::{fit_coefficients, radius_ladder, willmore_expansion_check, SphereMode};
use hawking_lab::geodesics::{sample_embedding, CoordinateSphere, GeodesicConfig, JetOrder, QuadraticPerturbation, ZeroPerturbation};
use hawking_lab::harmonics::{optimal_perturbation, pde_residual, HarmonicField, SphericalBasis};
use hawking_lab::manifold::{curvature_packet, MetricField, Monomial, Polynomial, SymmetricPolynomial};
use hawking_lab::optimizer::{closed_form_hawking, maximize_hawking, OptimizeConfig};
use hawking_lab::surface::{build_grid, expansion_order_check, extrinsic_geometry, hawking_mass, perturbed_sphere_surface};
use hawking_lab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// `‖S‖²` of spatial Schwarzschild at areal radius `r`: Ricci eigenvalues `−2m/r³, m/r³, m/r³`.
fn schwarzschild_s2(m: f64, r: f64) -> f64 {
    6.0 * m * m / r.powi(6)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn quadrature() -> Result<Outcome> {
    let g = build_grid(32, 64)?;
    let mut worst = 0.0f64;
    for mu in 0..3 {
        worst = worst.max(rel(g.integrate_fn(|n| n.dir[mu].powi(2)), 4.0 * PI / 3.0));
        worst = worst.max(rel(g.integrate_fn(|n| n.dir[mu].powi(4)), 4.0 * PI / 5.0));
        for nu in 0..3 {
            if nu != mu {
                worst = worst.max(rel(g.integrate_fn(|n| n.dir[mu].powi(2) * n.dir[nu].powi(2)), 4.0 * PI / 15.0));
            }
        }
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.3e} (tol 1e-12)"))
}

fn flat_zero_mass() -> Result<Outcome> {
    let m = MetricField::euclidean();
    let g = build_grid(16, 32)?;
    let cfg = GeodesicConfig::precise();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut round_worst = 0.0f64;
    for (p, rho) in [([0.0; 3], 1.0), ([0.3, -1.2, 2.0], 0.4), ([5.0, 1.0, -2.0], 3.0)] {
        round_worst = round_worst.max(hawking_mass(&perturbed_sphere_surface(&m, &p, rho, &ZeroPerturbation, &g, &cfg)?, 0)?.hawking.abs());
        let mut shift = HarmonicField::zeros(2);
        shift.set(0, 0, 0.1);
        round_worst = round_worst.max(hawking_mass(&perturbed_sphere_surface(&m, &p, rho, &shift, &g, &cfg)?, 0)?.hawking.abs());
    }
    let mut max_perturbed = f64::NEG_INFINITY;
    for _ in 0..10 {
        let mut w = HarmonicField::zeros(2);
        for mm in -2..=2 {
            w.set(2, mm, rng.gen_range(-1.0..1.0));
        }
        let w = w.scaled(rng.gen_range(0.05..0.1) / w.l2_norm());
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let rho = rng.gen_range(0.2..2.0);
        max_perturbed = max_perturbed.max(hawking_mass(&perturbed_sphere_surface(&m, &p, rho, &w, &g, &cfg)?, 0)?.hawking);
    }
    outcome(
        round_worst <= 1e-9 && max_perturbed < 0.0,
        format!("round |m_H| max {round_worst:.3e} (tol 1e-9); perturbed m_H max {max_perturbed:.3e} (< 0)"),
    )
}

fn schwarzschild_exactness() -> Result<Outcome> {
    let m = MetricField::schwarzschild(1.0);
    let g = build_grid(16, 32)?;
    let mut worst = 0.0f64;
    for r in [2.5, 4.0, 8.0] {
        let sample = sample_embedding(&CoordinateSphere { center: [0.0; 3], radius: r }, &g, JetOrder::Second)?;
        let s = extrinsic_geometry(&m, &sample, &g)?;
        worst = worst.max((hawking_mass(&s, 0)?.hawking - 1.0).abs());
    }
    outcome(worst <= 1e-6, format!("max |m_H − 1| {worst:.3e} (tol 1e-6)"))
}

fn ladder_fit(m: &MetricField, p: &[f64; 3], mode: SphereMode, rho0: f64, k: i32) -> Result<(f64, f64)> {
    let g = build_grid(16, 32)?;
    let l = radius_ladder(m, p, mode, rho0, 6, &g, k, &GeodesicConfig::precise())?;
    let f = fit_coefficients(&l.radii(), &l.masses())?;
    Ok((f.c3, f.c5))
}

fn expansion_recovery() -> Result<Outcome> {
    // sin³ρ / 2 = ρ³/2 − ρ⁵/4 + …
    let (s3, s5) = ladder_fit(&MetricField::round_sphere(1.0), &[0.1, 0.0, 0.2], SphereMode::Optimal, 0.2, 0)?;
    let (z3, z5) = ladder_fit(&MetricField::schwarzschild(1.0), &[0.0, 0.0, 4.0], SphereMode::Optimal, 0.4, 0)?;
    let oracle = schwarzschild_s2(1.0, 4.0) / 90.0;
    let (e1, e2, e3, e4) = (rel(s3, 0.5), rel(s5, -0.25), z3.abs(), rel(z5, oracle));
    outcome(
        e1 <= 0.01 && e2 <= 0.05 && e3 <= 2e-3 && e4 <= 0.10,
        format!("S³ c3 rel {e1:.2e}, c5 rel {e2:.2e}; Schwarzschild |c3| {e3:.2e}, c5 {z5:.6e} vs {oracle:.6e} rel {e4:.2e}"),
    )
}

fn traceless_isolation() -> Result<Outcome> {
    let m = MetricField::schwarzschild(1.0);
    let p = [0.0, 0.0, 4.0];
    let (_, opt) = ladder_fit(&m, &p, SphereMode::Optimal, 0.4, 0)?;
    let (_, unp) = ladder_fit(&m, &p, SphereMode::Unperturbed, 0.4, 0)?;
    let oracle = schwarzschild_s2(1.0, 4.0) / 90.0;
    let e = rel(opt - unp, oracle);
    outcome(e <= 0.10, format!("difference {:.6e} vs {oracle:.6e}, rel {e:.2e} (tol 0.1)", opt - unp))
}

fn pde_residuals() -> Result<Outcome> {
    let g = build_grid(16, 32)?;
    let basis = SphericalBasis::new(&g, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let conformal = MetricField::conformal(Polynomial(vec![
        Monomial { coeff: 0.05, powers: [2, 0, 0] },
        Monomial { coeff: -0.03, powers: [0, 1, 1] },
        Monomial { coeff: 0.02, powers: [1, 1, 1] },
    ]));
    let poly = MetricField::polynomial(SymmetricPolynomial {
        xx: Polynomial::monomial(0.1, [0, 2, 0]),
        xy: Polynomial::monomial(0.05, [0, 0, 2]),
        yz: Polynomial::monomial(0.04, [1, 1, 0]),
        zz: Polynomial::monomial(-0.08, [1, 0, 0]),
        ..Default::default()
    });
    let metrics = [
        (MetricField::euclidean(), 0.0),
        (MetricField::round_sphere(1.0), 0.0),
        (MetricField::hyperbolic(1.0), 0.0),
        (MetricField::schwarzschild(1.0), 3.0),
        (conformal, 0.0),
        (poly, 0.0),
    ];
    let mut worst = 0.0f64;
    for (m, offset) in &metrics {
        for _ in 0..10 {
            let mut p = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            p[2] += offset;
            let cp = curvature_packet(m, &p)?;
            let op = optimal_perturbation(&cp, 1.0)?;
            worst = worst.max(pde_residual(&cp, &op.wbar, &basis)?);
        }
    }
    outcome(worst < 1e-9, format!("max residual {worst:.3e} over 60 points (tol 1e-9)"))
}

fn generalized_rigidity() -> Result<Outcome> {
    let (h3, _) = ladder_fit(&MetricField::hyperbolic(1.0), &[0.1, 0.0, 0.0], SphereMode::Optimal, 0.2, -1)?;
    let (s3, _) = ladder_fit(&MetricField::round_sphere(1.0), &[0.1, 0.0, 0.2], SphereMode::Optimal, 0.2, 1)?;
    outcome(
        h3.abs() <= 1e-3 && s3.abs() <= 1e-3,
        format!("H³ K=−1 |c3| {:.3e}; S³ K=+1 |c3| {:.3e} (tol 1e-3)", h3.abs(), s3.abs()),
    )
}

fn optimizer_consistency() -> Result<Outcome> {
    let m = MetricField::schwarzschild(1.0);
    let p = [0.0, 0.0, 4.0];
    let rho = 0.05;
    let cfg = OptimizeConfig::default();
    let target = 4.0 * PI * rho * rho;
    let r = maximize_hawking(&m, &p, target, &cfg)?;
    // -Ric(Θ,Θ)/6 with Ric = diag(1, 1, −2)/64 in a frame whose third axis is radial
    let c20 = (20.0 * PI).sqrt() / 15.0 * (2.0 * (2.0 / 384.0) + 2.0 / 384.0);
    let mut oracle = [0.0; 5];
    oracle[2] = c20 * r.rho_star * r.rho_star;
    let got = r.w_star.degree(2);
    let diff: f64 = got.iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let e = diff / oracle[2].abs();
    let closed = closed_form_hawking(&m, &p, target, &cfg)?;
    outcome(
        r.converged && e <= 0.10 && r.m_h_star >= closed - 1e-8,
        format!(
            "l=2 rel error {e:.3e} (tol 0.1); m_H* {:.6e} vs closed form {closed:.6e}; {:?} after {} iterations",
            r.m_h_star, r.stop, r.iterations
        ),
    )
}

fn second_form_order() -> Result<Outcome> {
    let g = build_grid(16, 32)?;
    let cfg = GeodesicConfig::precise();
    let radii: Vec<f64> = (0..6).map(|k| 0.2 * 0.5f64.powi(k)).collect();
    let mut a = [[0.0; 3]; 3];
    a[0][0] = 0.01;
    a[1][1] = -0.01;
    let w = QuadraticPerturbation { a, c: 0.0 };
    let z = expansion_order_check(&MetricField::schwarzschild(1.0), &[0.0, 0.0, 4.0], &w, &radii, &g, &cfg)?;
    let s = expansion_order_check(&MetricField::round_sphere(1.0), &[0.1, 0.0, 0.2], &ZeroPerturbation, &radii, &g, &cfg)?;
    outcome(
        z.order >= 3.5 && s.order >= 3.5,
        format!("Schwarzschild order {:.3} (R² {:.5}); S³ order {:.3} (R² {:.5}); need ≥ 3.5", z.order, z.r_squared, s.order, s.r_squared),
    )
}

fn area_expansion() -> Result<Outcome> {
    let m = MetricField::round_sphere(1.0);
    let p = [0.1, 0.0, 0.2];
    let g = build_grid(16, 32)?;
    let l = radius_ladder(&m, &p, SphereMode::Optimal, 0.2, 6, &g, 0, &GeodesicConfig::precise())?;
    let wc = willmore_expansion_check(&curvature_packet(&m, &p)?, &l)?;
    // sin²ρ/ρ² − 1 = −ρ²/3 + …, and −Sc/18 = −1/3
    let e = rel(wc.area_rho2[0], -1.0 / 3.0);
    outcome(e <= 0.02, format!("ρ² coefficient {:.6e} vs −1/3, rel {e:.2e} (tol 0.02)", wc.area_rho2[0]))
}

type Criterion = (&'static str, u64, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("quadrature identities", 1, quadrature),
        ("flat-space zero mass", 10, flat_zero_mass),
        ("schwarzschild exactness", 30, schwarzschild_exactness),
        ("expansion recovery", 300, expansion_recovery),
        ("traceless-ricci isolation", 300, traceless_isolation),
        ("pde spectral residual", 10, pde_residuals),
        ("generalized-mass rigidity", 120, generalized_rigidity),
        ("optimizer consistency", 300, optimizer_consistency),
        ("second fundamental form expansion order", 120, second_form_order),
        ("area expansion", 60, area_expansion),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = run();
        let t = start.elapsed();
        let in_time = t <= Duration::from_secs(*budget);
        let (pass, detail) = match res {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail}; {:.2} s (budget {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            t.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
