//! Area-constrained maximisation of the Hawking mass over harmonic perturbations.
//!
//! The search variables are `u_{lm} = c_{lm} / ρ_t²` for `2 ≤ l ≤ L`, where
//! `ρ_t = √(|Σ|/4π)` is the radius matching the target area. After every change
//! of `u` the geodesic radius is rescaled until the area equals the target.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geodesics::GeodesicConfig;
use crate::harmonics::{optimal_perturbation, basis_len, bilaplacian_shifted_eigenvalue, degree_order, least_squares_lambda, willmore_el_residual, HarmonicField};
use crate::manifold::{curvature_packet, MetricField};
use crate::surface::{build_grid, hawking_mass, perturbed_sphere_area, perturbed_sphere_surface, EmbeddedSurface, SphereGrid};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub max_degree: usize,
    pub max_iters: usize,
    /// First trial step, in units of the preconditioned gradient.
    pub initial_step: f64,
    pub shrink: f64,
    /// Maximum backtracking halvings before the search is declared stalled.
    pub max_backtracks: usize,
    /// Central-difference step in `u = c / ρ_t²`.
    pub fd_step: f64,
    /// Tolerance on `‖∂m_H/∂c‖₂`.
    pub grad_tol: f64,
    pub seed: u64,
    /// Amplitude of the seeded starting point in `u`.
    pub init_scale: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Relative tolerance of the area rescale.
    pub area_tol: f64,
    pub geodesic: GeodesicConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            max_degree: 4,
            max_iters: 500,
            initial_step: 1.0,
            shrink: 0.5,
            max_backtracks: 30,
            fd_step: 1e-3,
            grad_tol: 1e-9,
            seed: 0,
            init_scale: 1e-4,
            n_theta: 16,
            n_phi: 32,
            area_tol: 1e-13,
            geodesic: GeodesicConfig::precise(),
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::Config(format!("optimizer: {m}")));
        if self.max_degree < 2 {
            return bad("max_degree must be at least 2");
        }
        if self.max_degree + 2 > self.n_theta {
            return Err(LabError::BandLimitExceeded {
                degree: self.max_degree,
                n_theta: self.n_theta,
                n_phi: self.n_phi,
            });
        }
        for (name, v) in [
            ("initial_step", self.initial_step),
            ("fd_step", self.fd_step),
            ("grad_tol", self.grad_tol),
            ("area_tol", self.area_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale must be non-negative");
        }
        self.geodesic.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    /// No ascent step could be found above the evaluation noise.
    Stalled,
    MaxIterations,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub hawking: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub rho: f64,
    pub area_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeResult {
    pub label: &'static str,
    pub w_star: HarmonicField,
    pub rho_star: f64,
    pub target_area: f64,
    pub area: f64,
    pub m_h_star: f64,
    pub m_h_initial: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub stop: StopReason,
    /// `ρ³ · sup |EL residual|` at the least-squares multiplier.
    pub el_residual_norm: f64,
    pub lambda: f64,
    pub trace: Vec<TraceRow>,
}

struct Problem<'a> {
    metric: &'a MetricField,
    p: [f64; 3],
    frame: [[f64; 3]; 3],
    target: f64,
    rho_t: f64,
    grid: SphereGrid,
    cfg: &'a OptimizeConfig,
    /// `(l, m)` of each search variable.
    modes: Vec<(usize, i64)>,
}

#[derive(Clone, Debug)]
struct Eval {
    rho: f64,
    area: f64,
    hawking: f64,
}

impl Problem<'_> {
    fn field(&self, u: &[f64]) -> HarmonicField {
        let mut f = HarmonicField::zeros(self.cfg.max_degree);
        let s = self.rho_t * self.rho_t;
        for (v, &(l, m)) in u.iter().zip(&self.modes) {
            f.set(l, m, v * s);
        }
        f
    }

    fn rescale(&self, w: &HarmonicField, rho_guess: f64) -> Result<(f64, f64)> {
        let mut rho = rho_guess;
        for _ in 0..50 {
            let a = perturbed_sphere_area(self.metric, &self.frame, &self.p, rho, w, &self.grid, &self.cfg.geodesic)?;
            if (a / self.target - 1.0).abs() <= self.cfg.area_tol {
                return Ok((rho, a));
            }
            rho *= (self.target / a).sqrt();
        }
        Err(LabError::NoConvergence {
            iterations: 50,
            grad_norm: f64::NAN,
        })
    }

    fn evaluate(&self, u: &[f64], rho_guess: f64) -> Result<Eval> {
        let w = self.field(u);
        let (rho, _) = self.rescale(&w, rho_guess)?;
        let s = self.surface(&w, rho)?;
        let r = hawking_mass(&s, 0)?;
        Ok(Eval {
            rho,
            area: r.area,
            hawking: r.hawking,
        })
    }

    fn surface(&self, w: &HarmonicField, rho: f64) -> Result<EmbeddedSurface> {
        perturbed_sphere_surface(self.metric, &self.p, rho, w, &self.grid, &self.cfg.geodesic)
    }

    /// `∂m_H/∂u` by central differences.
    fn gradient(&self, u: &[f64], rho: f64) -> Result<Vec<f64>> {
        let h = self.cfg.fd_step;
        (0..u.len())
            .into_par_iter()
            .map(|i| {
                let mut up = u.to_vec();
                let mut dn = u.to_vec();
                up[i] += h;
                dn[i] -= h;
                Ok((self.evaluate(&up, rho)?.hawking - self.evaluate(&dn, rho)?.hawking) / (2.0 * h))
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximises `m_H` over `S_{p,ρ}(w)` with `w` in degrees `2..=L` at fixed area.
///
/// Preconditioned projected-gradient ascent: the gradient is scaled per degree by
/// the inverse eigenvalue of `Δ(Δ+2)`, steps follow Barzilai–Borwein with Armijo
/// backtracking. A search that exhausts its backtracking budget after having
/// reduced the gradient norm by `10³` counts as converged at the noise floor.
pub fn maximize_hawking(metric: &MetricField, p: &[f64; 3], target_area: f64, cfg: &OptimizeConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    metric.check_domain(p)?;
    if !(target_area > 0.0 && target_area.is_finite()) {
        return Err(LabError::Config(format!("target area must be positive, got {target_area}")));
    }
    let rho_t = (target_area / (4.0 * PI)).sqrt();
    let bound = metric.injectivity_bound();
    if rho_t >= bound {
        return Err(LabError::RadiusOutOfRange { rho: rho_t, limit: bound });
    }
    let modes: Vec<(usize, i64)> = (4..basis_len(cfg.max_degree)).map(degree_order).collect();
    let problem = Problem {
        metric,
        p: *p,
        frame: metric.orthonormal_frame(p)?,
        target: target_area,
        rho_t,
        grid: build_grid(cfg.n_theta, cfg.n_phi)?,
        cfg,
        modes,
    };
    let precond: Vec<f64> = problem
        .modes
        .iter()
        .map(|&(l, _)| bilaplacian_shifted_eigenvalue(2) / bilaplacian_shifted_eigenvalue(l))
        .collect();
    // m_H ~ ρ⁵ and u-curvature ~ ρ⁵/(32π): normalise so steps are O(1)
    let scale = rho_t.powi(5) / (32.0 * PI);
    // ∂m/∂c = ∂m/∂u / ρ_t²
    let to_c = 1.0 / (rho_t * rho_t);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u: Vec<f64> = (0..problem.modes.len())
        .map(|_| cfg.init_scale * rng.gen_range(-1.0..1.0))
        .collect();
    let m0 = problem.evaluate(&vec![0.0; u.len()], rho_t)?;
    let mut cur = problem.evaluate(&u, m0.rho)?;
    let mut g = problem.gradient(&u, cur.rho)?;
    let g0 = dot(&g, &g).sqrt() * to_c;
    let mut alpha = cfg.initial_step / bilaplacian_shifted_eigenvalue(2);
    let mut trace = vec![TraceRow {
        iteration: 0,
        hawking: cur.hawking,
        grad_norm: g0,
        step: 0.0,
        rho: cur.rho,
        area_rel_error: cur.area / target_area - 1.0,
    }];
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    for it in 1..=cfg.max_iters {
        let gnorm = dot(&g, &g).sqrt() * to_c;
        if gnorm <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        iterations = it;
        // ascent direction in normalised units
        let d: Vec<f64> = g.iter().zip(&precond).map(|(gi, pi)| gi * pi / scale).collect();
        let slope = dot(&g, &d);
        let mut step = alpha;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let e = problem.evaluate(&trial, cur.rho)?;
            if e.hawking >= cur.hawking + 1e-4 * step * slope {
                accepted = Some((trial, e));
                break;
            }
            step *= cfg.shrink;
        }
        let Some((next, e)) = accepted else {
            stop = StopReason::Stalled;
            iterations = it - 1;
            break;
        };
        let gn = problem.gradient(&next, e.rho)?;
        // Barzilai–Borwein in the preconditioned metric
        let s: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| (a - b) / scale).collect();
        let sy = dot(&s, &y);
        let s_pinv: f64 = s.iter().zip(&precond).map(|(a, pi)| a * a / pi).sum();
        alpha = if sy < 0.0 { (s_pinv / -sy).clamp(1e-6, 1e3) } else { step * 2.0 };
        u = next;
        cur = e;
        g = gn;
        trace.push(TraceRow {
            iteration: it,
            hawking: cur.hawking,
            grad_norm: dot(&g, &g).sqrt() * to_c,
            step,
            rho: cur.rho,
            area_rel_error: cur.area / target_area - 1.0,
        });
    }
    let grad_norm = dot(&g, &g).sqrt() * to_c;
    let converged = match stop {
        StopReason::GradientTolerance => true,
        StopReason::Stalled => grad_norm <= 1e-3 * g0.max(cfg.grad_tol),
        StopReason::MaxIterations => grad_norm <= cfg.grad_tol,
    };
    let w_star = problem.field(&u);
    let surface = problem.surface(&w_star, cur.rho)?;
    let lambda = least_squares_lambda(&surface, metric)?;
    let el = willmore_el_residual(&surface, metric, lambda)?;
    let el_norm = el.iter().fold(0.0f64, |a, v| a.max(v.abs())) * cur.rho.powi(3);
    Ok(OptimizeResult {
        label: "restricted sup-Hawking estimate",
        w_star,
        rho_star: cur.rho,
        target_area,
        area: cur.area,
        m_h_star: cur.hawking,
        m_h_initial: m0.hawking,
        iterations,
        grad_norm,
        converged,
        stop,
        el_residual_norm: el_norm,
        lambda,
        trace,
    })
}

/// `m_H` of the closed-form optimal perturbation, rescaled to the target area.
pub fn closed_form_hawking(metric: &MetricField, p: &[f64; 3], target_area: f64, cfg: &OptimizeConfig) -> Result<f64> {
    cfg.validate()?;
    let rho_t = (target_area / (4.0 * PI)).sqrt();
    let cp = curvature_packet(metric, p)?;
    let w = optimal_perturbation(&cp, rho_t)?.w_of_rho();
    let problem = Problem {
        metric,
        p: *p,
        frame: metric.orthonormal_frame(p)?,
        target: target_area,
        rho_t,
        grid: build_grid(cfg.n_theta, cfg.n_phi)?,
        cfg,
        modes: Vec::new(),
    };
    let (rho, _) = problem.rescale(&w, rho_t)?;
    Ok(hawking_mass(&problem.surface(&w, rho)?, 0)?.hawking)
}

/// Least-squares multiplier of the Willmore Euler–Lagrange equation on the optimum.
pub fn lagrange_multiplier_estimate(result: &OptimizeResult, metric: &MetricField, p: &[f64; 3], cfg: &OptimizeConfig) -> Result<f64> {
    let grid = build_grid(cfg.n_theta, cfg.n_phi)?;
    let s = perturbed_sphere_surface(metric, p, result.rho_star, &result.w_star, &grid, &cfg.geodesic)?;
    least_squares_lambda(&s, metric)
}

/// Writes `iteration,hawking,grad_norm,step,rho,area_rel_error`.
pub fn write_trace_csv<W: Write>(result: &OptimizeResult, mut out: W) -> Result<()> {
    writeln!(out, "iteration,hawking,grad_norm,step,rho,area_rel_error")?;
    for r in &result.trace {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iteration, r.hawking, r.grad_norm, r.step, r.rho, r.area_rel_error
        )?;
    }
    Ok(())
}
