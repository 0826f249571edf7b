//! Radius ladders of the Hawking mass, coefficient fits and the Bartnik lower bound.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geodesics::{GeodesicConfig, ZeroPerturbation};
use crate::harmonics::optimal_perturbation;
use crate::manifold::{curvature_packet, CurvaturePacket, MetricField};
use crate::surface::{hawking_mass, log_log_slope, perturbed_sphere_surface, SphereGrid};

/// Which family of spheres a ladder samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereMode {
    /// `w = ρ² wbar`.
    Optimal,
    /// `w ≡ 0`.
    Unperturbed,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LadderSample {
    pub rho: f64,
    pub area: f64,
    pub willmore: f64,
    /// Plain or generalized mass depending on the ladder's `K`.
    pub hawking: f64,
    pub predicted_leading: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Ladder {
    pub mode: SphereMode,
    pub cosmological_sign: i32,
    pub samples: Vec<LadderSample>,
}

impl Ladder {
    pub fn radii(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rho).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.hawking).collect()
    }
}

/// `ρ_k = ρ₀ 2^{−k}` for `k < n`, with the mass of each sphere.
#[allow(clippy::too_many_arguments)]
pub fn radius_ladder(
    metric: &MetricField,
    p: &[f64; 3],
    mode: SphereMode,
    rho0: f64,
    n: usize,
    grid: &SphereGrid,
    k: i32,
    cfg: &GeodesicConfig,
) -> Result<Ladder> {
    if n < 5 {
        return Err(LabError::FitUnstable(format!("ladder needs at least 5 radii, got {n}")));
    }
    let bound = metric.injectivity_bound();
    if !(rho0 > 0.0 && rho0 < bound) {
        return Err(LabError::RadiusOutOfRange { rho: rho0, limit: bound });
    }
    let cp = curvature_packet(metric, p)?;
    let pred = predicted_coefficients(&cp, mode, k);
    let samples: Vec<Result<LadderSample>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rho = rho0 * 0.5f64.powi(i as i32);
            let surface = match mode {
                SphereMode::Optimal => {
                    let w = optimal_perturbation(&cp, rho)?.w_of_rho();
                    perturbed_sphere_surface(metric, p, rho, &w, grid, cfg)?
                }
                SphereMode::Unperturbed => perturbed_sphere_surface(metric, p, rho, &ZeroPerturbation, grid, cfg)?,
            };
            let r = hawking_mass(&surface, k)?;
            Ok(LadderSample {
                rho,
                area: r.area,
                willmore: r.willmore,
                hawking: r.mass(),
                predicted_leading: pred.c3 * rho.powi(3),
            })
        })
        .collect();
    Ok(Ladder {
        mode,
        cosmological_sign: k,
        samples: samples.into_iter().collect::<Result<_>>()?,
    })
}

/// Ordinary least squares `y ≈ X β` by SVD; returns `(β, condition number, rms residual)`.
pub fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64, f64)> {
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= 1e8) {
        return Err(LabError::FitUnstable(format!("design condition number {cond:.3e} exceeds 1e8")));
    }
    let beta = svd
        .solve(y, 0.0)
        .map_err(|e| LabError::FitUnstable(e.to_string()))?;
    let r = design * &beta - y;
    let rms = (r.norm_squared() / y.len() as f64).sqrt();
    Ok((beta, cond, rms))
}

/// Least-squares fit of `values[i] / radii[i]^shift` against `radii^powers`.
fn power_fit(radii: &[f64], values: &[f64], shift: i32, powers: &[i32]) -> Result<(Vec<f64>, f64, f64)> {
    if radii.len() != values.len() || radii.len() < powers.len() + 2 {
        return Err(LabError::FitUnstable(format!(
            "{} samples for {} basis functions",
            values.len(),
            powers.len()
        )));
    }
    if values.iter().chain(radii).any(|v| !v.is_finite()) {
        return Err(LabError::FitUnstable("non-finite sample".into()));
    }
    let x = DMatrix::from_fn(radii.len(), powers.len(), |i, j| radii[i].powi(powers[j]));
    let y = DVector::from_iterator(radii.len(), radii.iter().zip(values).map(|(r, v)| v / r.powi(shift)));
    let (beta, cond, rms) = least_squares(&x, &y)?;
    Ok((beta.iter().copied().collect(), cond, rms))
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionFit {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub c3: f64,
    pub c5: f64,
    /// Nuisance `ρ⁶` coefficient.
    pub c6: f64,
    pub condition: f64,
    /// RMS residual of `value / ρ³`.
    pub rms: f64,
}

/// Fits `m(ρ) ≈ c₃ρ³ + c₅ρ⁵ + c₆ρ⁶` with weights `ρ⁻⁶`.
pub fn fit_coefficients(radii: &[f64], values: &[f64]) -> Result<ExpansionFit> {
    if radii.len() < 5 {
        return Err(LabError::FitUnstable(format!("need at least 5 samples, got {}", radii.len())));
    }
    let (b, condition, rms) = power_fit(radii, values, 3, &[0, 2, 3])?;
    Ok(ExpansionFit {
        radii: radii.to_vec(),
        values: values.to_vec(),
        c3: b[0],
        c5: b[1],
        c6: b[2],
        condition,
        rms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PredictionMode {
    Optimal,
    Unperturbed,
    Generalized { k: i32 },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PredictedCoefficients {
    pub mode: PredictionMode,
    pub c3: f64,
    pub c5: f64,
    /// `ρ²` and `ρ⁴` coefficients of `16π − W − 4K|Σ|` (generalized mode only).
    pub willmore_pair: Option<[f64; 2]>,
}

/// Predicted `ρ³`, `ρ⁵` coefficients. A nonzero `k` selects the generalized mass.
pub fn predicted_coefficients(cp: &CurvaturePacket, mode: SphereMode, k: i32) -> PredictedCoefficients {
    let sc = cp.scalar;
    let lap = cp.scalar_laplacian;
    let s2 = cp.traceless_norm_sq;
    if k != 0 {
        let kf = k as f64;
        let b2 = 8.0 * PI / 3.0 * sc - 16.0 * PI * kf;
        let b4 = 4.0 * PI / 15.0 * lap + 16.0 * PI / 45.0 * s2 - 4.0 * PI / 27.0 * sc * sc
            + 8.0 * PI * kf / 9.0 * sc;
        return PredictedCoefficients {
            mode: PredictionMode::Generalized { k },
            c3: b2 / (32.0 * PI),
            c5: (b4 - sc * b2 / 36.0) / (32.0 * PI),
            willmore_pair: Some([b2, b4]),
        };
    }
    let base = lap / 120.0 - sc * sc / 144.0;
    match mode {
        SphereMode::Optimal => PredictedCoefficients {
            mode: PredictionMode::Optimal,
            c3: sc / 12.0,
            c5: base + s2 / 90.0,
            willmore_pair: None,
        },
        SphereMode::Unperturbed => PredictedCoefficients {
            mode: PredictionMode::Unperturbed,
            c3: sc / 12.0,
            c5: base,
            willmore_pair: None,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub c3_abs: f64,
    pub c3_rel: f64,
    pub c5_abs: f64,
    pub c5_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            c3_abs: 2e-3,
            c3_rel: 0.01,
            c5_abs: 1e-6,
            c5_rel: 0.10,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoefficientDelta {
    pub fitted: f64,
    pub predicted: f64,
    pub abs_delta: f64,
    /// `NaN` when the prediction is zero.
    pub rel_delta: f64,
    pub pass: bool,
}

impl CoefficientDelta {
    fn new(fitted: f64, predicted: f64, abs_tol: f64, rel_tol: f64) -> Self {
        let abs_delta = (fitted - predicted).abs();
        let rel_delta = if predicted != 0.0 {
            abs_delta / predicted.abs()
        } else {
            f64::NAN
        };
        Self {
            fitted,
            predicted,
            abs_delta,
            rel_delta,
            pass: abs_delta <= abs_tol.max(rel_tol * predicted.abs()),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Comparison {
    pub prediction: PredictedCoefficients,
    pub c3: CoefficientDelta,
    pub c5: CoefficientDelta,
    pub pass: bool,
}

pub fn compare_report(fit: &ExpansionFit, pred: &PredictedCoefficients, tol: &Tolerances) -> Comparison {
    let c3 = CoefficientDelta::new(fit.c3, pred.c3, tol.c3_abs, tol.c3_rel);
    let c5 = CoefficientDelta::new(fit.c5, pred.c5, tol.c5_abs, tol.c5_rel);
    Comparison {
        prediction: *pred,
        c3,
        c5,
        pass: c3.pass && c5.pass,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WillmoreCheck {
    pub radii: Vec<f64>,
    /// Fitted and predicted `ρ²` coefficient of `W − 16π`.
    pub willmore_rho2: [f64; 2],
    /// Fitted and predicted `ρ⁴` coefficient of `W − 16π`.
    pub willmore_rho4: [f64; 2],
    /// Fitted and predicted `ρ²` coefficient of `|Σ|/(4πρ²) − 1`.
    pub area_rho2: [f64; 2],
    pub area_rho4: f64,
    /// Decay order of `|Σ|/(4πρ²) − (1 − Sc ρ²/18)`; infinite when it vanishes.
    pub area_order: f64,
    pub condition: f64,
}

/// Expansion coefficients of `W` and `|Σ|` along an optimal ladder.
pub fn willmore_expansion_check(cp: &CurvaturePacket, ladder: &Ladder) -> Result<WillmoreCheck> {
    if ladder.mode != SphereMode::Optimal {
        return Err(LabError::Config("Willmore check needs an optimal ladder".into()));
    }
    let radii = ladder.radii();
    let w: Vec<f64> = ladder.samples.iter().map(|s| s.willmore - 16.0 * PI).collect();
    let a: Vec<f64> = ladder
        .samples
        .iter()
        .map(|s| s.area / (4.0 * PI * s.rho * s.rho) - 1.0)
        .collect();
    let (wb, c1, _) = power_fit(&radii, &w, 2, &[0, 2, 3])?;
    let (ab, c2, _) = power_fit(&radii, &a, 2, &[0, 2])?;
    let sc = cp.scalar;
    let resid: Vec<f64> = radii
        .iter()
        .zip(&a)
        .map(|(r, v)| (v + sc * r * r / 18.0).abs())
        .collect();
    let scale = radii[0].powi(2) * sc.abs().max(1.0);
    let area_order = if resid.iter().all(|r| *r < 1e-13 * scale) {
        f64::INFINITY
    } else {
        log_log_slope(&radii, &resid).0
    };
    Ok(WillmoreCheck {
        radii,
        willmore_rho2: [wb[0], -8.0 * PI / 3.0 * sc],
        willmore_rho4: [
            wb[1],
            4.0 * PI / 27.0 * sc * sc - 16.0 * PI / 45.0 * cp.traceless_norm_sq - 4.0 * PI / 15.0 * cp.scalar_laplacian,
        ],
        area_rho2: [ab[0], -sc / 18.0],
        area_rho4: ab[1],
        area_order,
        condition: c1.max(c2),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BartnikBound {
    pub point: [f64; 3],
    pub rho: f64,
    pub validity_radius: f64,
    /// `Sc ρ³/12 + c₅ ρ⁵`.
    pub bound: f64,
    pub leading: f64,
    pub next: f64,
    pub remainder: &'static str,
    /// `Sc(p) ≥ 0`, which the estimate presumes.
    pub scalar_nonnegative: bool,
}

pub fn bartnik_lower_bound(cp: &CurvaturePacket, rho: f64, rbar: f64) -> Result<BartnikBound> {
    if !(rho > 0.0 && rho < rbar / 2.0) {
        return Err(LabError::RadiusOutOfRange { rho, limit: rbar / 2.0 });
    }
    let pred = predicted_coefficients(cp, SphereMode::Optimal, 0);
    let leading = pred.c3 * rho.powi(3);
    let next = pred.c5 * rho.powi(5);
    Ok(BartnikBound {
        point: cp.point,
        rho,
        validity_radius: rbar,
        bound: leading + next,
        leading,
        next,
        remainder: "O(rho^6) dropped",
        scalar_nonnegative: cp.scalar >= 0.0,
    })
}

/// Writes `rho,area,willmore,hawking,predicted_leading`.
pub fn write_ladder_csv<W: Write>(ladder: &Ladder, mut out: W) -> Result<()> {
    writeln!(out, "rho,area,willmore,hawking,predicted_leading")?;
    for s in &ladder.samples {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.rho, s.area, s.willmore, s.hawking, s.predicted_leading
        )?;
    }
    Ok(())
}
