//! Command pipelines behind the `hawking-lab` binary.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::expansion::{
    bartnik_lower_bound, compare_report, fit_coefficients, predicted_coefficients, radius_ladder, willmore_expansion_check,
    write_ladder_csv, Comparison, ExpansionFit, Ladder, SphereMode, WillmoreCheck,
};
use crate::harmonics::{
    least_squares_lambda, optimal_perturbation, pde_residual, willmore_el_residual, write_coefficients_csv, SphericalBasis,
};
use crate::manifold::curvature_packet;
use crate::optimizer::{closed_form_hawking, maximize_hawking, write_trace_csv};
use crate::report::{format_float, Check, Report};
use crate::surface::{build_grid, log_log_slope, perturbed_sphere_surface};

pub const COMMANDS: [&str; 6] = ["integrals-check", "curvature", "expansion", "optimize", "bartnik", "el-residual"];

/// A finished command: its JSON report plus any CSV side outputs.
pub struct Outcome {
    pub pass: bool,
    pub report: String,
    pub failing: Vec<String>,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn new<R: Serialize>(command: &str, cfg: &RunConfig, checks: Vec<Check>, result: R, mut files: Vec<(String, String)>) -> Result<Self> {
        let report = Report::new(command, cfg, checks, result)?;
        let failing = report.failing().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        let text = report.to_json()?;
        files.insert(0, ("report.json".into(), text.clone()));
        Ok(Self {
            pass: report.pass,
            report: text,
            failing,
            files,
        })
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

fn csv<F: FnOnce(&mut Vec<u8>) -> Result<()>>(f: F) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| LabError::Config(e.to_string()))
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        "integrals-check" => integrals_check(cfg),
        "curvature" => curvature(cfg),
        "expansion" => expansion(cfg),
        "optimize" => optimize(cfg),
        "bartnik" => bartnik(cfg),
        "el-residual" => el_residual(cfg),
        other => Err(LabError::Config(format!("unknown command {other}; expected one of {COMMANDS:?}"))),
    }
}

#[derive(Serialize)]
struct Identity {
    name: String,
    value: f64,
    exact: f64,
    error: f64,
}

#[derive(Serialize)]
struct IntegralsResult {
    n_theta: usize,
    n_phi: usize,
    max_error: f64,
    identities: Vec<Identity>,
}

pub fn integrals_check(cfg: &RunConfig) -> Result<Outcome> {
    let g = build_grid(cfg.surface.n_theta, cfg.surface.n_phi)?;
    let mut ids = Vec::new();
    let mut push = |name: String, value: f64, exact: f64| {
        let error = if exact != 0.0 { (value / exact - 1.0).abs() } else { value.abs() };
        ids.push(Identity { name, value, exact, error });
    };
    push("one".into(), g.integrate_fn(|_| 1.0), 4.0 * PI);
    let axes = ["x", "y", "z"];
    for mu in 0..3 {
        push(format!("{}^2", axes[mu]), g.integrate_fn(|n| n.dir[mu].powi(2)), 4.0 * PI / 3.0);
        push(format!("{}^4", axes[mu]), g.integrate_fn(|n| n.dir[mu].powi(4)), 4.0 * PI / 5.0);
        for nu in mu + 1..3 {
            push(
                format!("{}^2 {}^2", axes[mu], axes[nu]),
                g.integrate_fn(|n| n.dir[mu].powi(2) * n.dir[nu].powi(2)),
                4.0 * PI / 15.0,
            );
        }
    }
    push("xyz".into(), g.integrate_fn(|n| n.dir[0] * n.dir[1] * n.dir[2]), 0.0);
    let checks = ids
        .iter()
        .map(|i| Check::at_most(&format!("integral {}", i.name), i.error, if i.exact == 0.0 { 1e-13 } else { 1e-12 }))
        .collect();
    let max_error = ids.iter().fold(0.0f64, |a, i| a.max(i.error));
    eprintln!("max quadrature error {}", format_float(max_error));
    Outcome::new(
        "integrals-check",
        cfg,
        checks,
        IntegralsResult {
            n_theta: g.n_theta,
            n_phi: g.n_phi,
            max_error,
            identities: ids,
        },
        vec![],
    )
}

pub fn curvature(cfg: &RunConfig) -> Result<Outcome> {
    let metric = cfg.metric()?;
    let cp = curvature_packet(&metric, &cfg.manifold.point)?;
    let tr: f64 = (0..3).map(|i| cp.ricci[i][i]).sum();
    let tr_s: f64 = (0..3).map(|i| cp.traceless[i][i]).sum();
    let scale = cp.scalar.abs().max(cp.traceless_norm_sq.sqrt()).max(1.0);
    let identity = (cp.traceless_norm_sq - cp.traceless_norm_identity()).abs();
    let checks = vec![
        Check::at_most("ricci trace equals scalar", (tr - cp.scalar).abs(), 1e-9 * scale),
        Check::at_most("traceless part has zero trace", tr_s.abs(), 1e-9 * scale),
        Check::at_most("traceless norm identity", identity, 1e-9 * scale * scale),
    ];
    Outcome::new("curvature", cfg, checks, cp, vec![])
}

#[derive(Serialize)]
struct ExpansionResult {
    fit: ExpansionFit,
    comparison: Comparison,
    ladder: Ladder,
    willmore: Option<WillmoreCheck>,
    unperturbed_fit: Option<ExpansionFit>,
    traceless_difference: Option<[f64; 2]>,
}

pub fn expansion(cfg: &RunConfig) -> Result<Outcome> {
    let e = &cfg.expansion;
    let metric = cfg.metric()?;
    let p = cfg.manifold.point;
    let grid = build_grid(cfg.surface.n_theta, cfg.surface.n_phi)?;
    let cp = curvature_packet(&metric, &p)?;
    let ladder = radius_ladder(&metric, &p, e.mode, e.rho0, e.n, &grid, e.k, &cfg.geodesics)?;
    let fit = fit_coefficients(&ladder.radii(), &ladder.masses())?;
    let pred = predicted_coefficients(&cp, e.mode, e.k);
    let comparison = compare_report(&fit, &pred, &e.tolerances);
    let mut checks = vec![
        Check::at_most("c3", comparison.c3.abs_delta, e.tolerances.c3_abs.max(e.tolerances.c3_rel * pred.c3.abs())),
        Check::at_most("c5", comparison.c5.abs_delta, e.tolerances.c5_abs.max(e.tolerances.c5_rel * pred.c5.abs())),
    ];
    let mut files = vec![("ladder.csv".to_string(), csv(|b| write_ladder_csv(&ladder, b))?)];
    let willmore = if e.mode == SphereMode::Optimal {
        let w = willmore_expansion_check(&cp, &ladder)?;
        let [fit2, pred2] = w.willmore_rho2;
        checks.push(Check::at_most(
            "willmore rho^2 coefficient",
            (fit2 - pred2).abs(),
            (32.0 * PI * e.tolerances.c3_abs).max(e.tolerances.c3_rel * pred2.abs()),
        ));
        let [afit, apred] = w.area_rho2;
        checks.push(Check::at_most("area rho^2 coefficient", (afit - apred).abs(), (1e-6f64).max(0.02 * apred.abs())));
        checks.push(Check::at_least("area expansion order", w.area_order, 3.5));
        Some(w)
    } else {
        None
    };
    let (unperturbed_fit, traceless_difference) = if e.traceless_difference && e.mode == SphereMode::Optimal && e.k == 0 {
        let u = radius_ladder(&metric, &p, SphereMode::Unperturbed, e.rho0, e.n, &grid, 0, &cfg.geodesics)?;
        files.push(("ladder_unperturbed.csv".into(), csv(|b| write_ladder_csv(&u, b))?));
        let uf = fit_coefficients(&u.radii(), &u.masses())?;
        let diff = fit.c5 - uf.c5;
        let oracle = cp.traceless_norm_sq / 90.0;
        checks.push(Check::at_most(
            "c5 difference equals |S|^2/90",
            (diff - oracle).abs(),
            e.tolerances.c5_abs.max(e.traceless_rel_tol * oracle.abs()),
        ));
        (Some(uf), Some([diff, oracle]))
    } else {
        (None, None)
    };
    Outcome::new(
        "expansion",
        cfg,
        checks,
        ExpansionResult {
            fit,
            comparison,
            ladder,
            willmore,
            unperturbed_fit,
            traceless_difference,
        },
        files,
    )
}

#[derive(Serialize)]
struct OptimizeReport {
    result: crate::optimizer::OptimizeResult,
    closed_form_hawking: f64,
    closed_form_l2: Vec<f64>,
}

pub fn optimize(cfg: &RunConfig) -> Result<Outcome> {
    let metric = cfg.metric()?;
    let p = cfg.manifold.point;
    let ocfg = cfg.optimize_config();
    let target = 4.0 * PI * cfg.optimizer.rho.powi(2);
    let r = maximize_hawking(&metric, &p, target, &ocfg)?;
    let closed = closed_form_hawking(&metric, &p, target, &ocfg)?;
    let cp = curvature_packet(&metric, &p)?;
    let wbar = optimal_perturbation(&cp, r.rho_star)?.w_of_rho();
    let mut checks = vec![
        Check::flag("converged", r.converged, &format!("{:?}, gradient norm {:e}", r.stop, r.grad_norm)),
        Check::at_most("area constraint", (r.area / target - 1.0).abs(), 1e-10),
        Check::at_least("not below closed-form perturbation", r.m_h_star - closed, -1e-8),
    ];
    let scale = wbar.degree(2).iter().map(|c| c * c).sum::<f64>().sqrt();
    if scale > 0.0 {
        let diff = r
            .w_star
            .degree(2)
            .iter()
            .zip(wbar.degree(2))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        checks.push(Check::at_most("l=2 coefficients match closed form", diff / scale, 0.1));
    }
    let files = vec![
        ("trace.csv".to_string(), csv(|b| write_trace_csv(&r, b))?),
        ("coefficients.csv".to_string(), csv(|b| write_coefficients_csv(&r.w_star, b))?),
    ];
    Outcome::new(
        "optimize",
        cfg,
        checks,
        OptimizeReport {
            closed_form_l2: wbar.degree(2).to_vec(),
            closed_form_hawking: closed,
            result: r,
        },
        files,
    )
}

pub fn bartnik(cfg: &RunConfig) -> Result<Outcome> {
    let metric = cfg.metric()?;
    let cp = curvature_packet(&metric, &cfg.manifold.point)?;
    let b = bartnik_lower_bound(&cp, cfg.expansion.bartnik_rho, cfg.expansion.validity_radius)?;
    let checks = vec![
        Check::flag("scalar curvature non-negative at p", b.scalar_nonnegative, &format!("Sc = {:e}", cp.scalar)),
        Check::flag("bound finite", b.bound.is_finite(), &format!("{:e}", b.bound)),
    ];
    Outcome::new("bartnik", cfg, checks, b, vec![])
}

#[derive(Serialize)]
struct ElRow {
    rho: f64,
    lambda: f64,
    sup: f64,
    scaled: f64,
    lambda_least_squares: f64,
}

#[derive(Serialize)]
struct ElResult {
    pde_residual: f64,
    rows: Vec<ElRow>,
    order: f64,
}

pub fn el_residual(cfg: &RunConfig) -> Result<Outcome> {
    let h = &cfg.harmonics;
    let metric = cfg.metric()?;
    let p = cfg.manifold.point;
    let grid = build_grid(cfg.surface.n_theta, cfg.surface.n_phi)?;
    let cp = curvature_packet(&metric, &p)?;
    let basis = SphericalBasis::new(&grid, (grid.n_theta - 2).min(8))?;
    let pde = pde_residual(&cp, &optimal_perturbation(&cp, 1.0)?.wbar, &basis)?;
    if h.radii.len() < 2 {
        return Err(LabError::Config("harmonics.radii needs at least two radii".into()));
    }
    let mut rows = Vec::new();
    for &rho in &h.radii {
        let op = optimal_perturbation(&cp, rho)?;
        let s = perturbed_sphere_surface(&metric, &p, rho, &op.w_of_rho(), &grid, &cfg.geodesics)?;
        let r = willmore_el_residual(&s, &metric, op.lambda)?;
        let sup = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        rows.push(ElRow {
            rho,
            lambda: op.lambda,
            sup,
            scaled: sup * rho.powi(3),
            lambda_least_squares: least_squares_lambda(&s, &metric)?,
        });
    }
    let scaled: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
    let order = if scaled.iter().all(|v| *v < 1e-10) {
        f64::INFINITY
    } else {
        log_log_slope(&h.radii, &scaled).0
    };
    let checks = vec![
        Check::at_most("optimal perturbation PDE residual", pde, h.pde_tol),
        Check::at_least("EL residual decay order", order, h.el_min_order),
    ];
    let mut text = String::from("rho,lambda,el_sup,el_scaled,lambda_least_squares\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            format_float(r.rho),
            format_float(r.lambda),
            format_float(r.sup),
            format_float(r.scaled),
            format_float(r.lambda_least_squares)
        ));
    }
    Outcome::new(
        "el-residual",
        cfg,
        checks,
        ElResult {
            pde_residual: pde,
            rows,
            order,
        },
        vec![("el_residual.csv".into(), text)],
    )
}
