//! Exponential map by adaptive Dormand–Prince integration of the geodesic equation,
//! and the perturbed geodesic spheres built from it.
//!
//! The integrator is generic over [`Real`]: run on [`Jet2`](crate::real::Jet2)
//! inputs it returns the embedding together with its first and second angular
//! derivatives. Step-size control only looks at primal values, so the derivative
//! parts are exact derivatives of the discrete map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::*;
use crate::manifold::MetricField;
use crate::real::{jet2_grad, jet2_hess, jet2_value, jet2_variable, Jet1, Jet2, Real};
use crate::surface::SphereGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeodesicConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 100_000,
        }
    }
}

impl GeodesicConfig {
    /// Tolerances used by the mass pipelines, where the signal sits many digits
    /// below the size of the surface.
    pub fn precise() -> Self {
        GeodesicConfig {
            rel_tol: 1e-13,
            abs_tol: 1e-15,
            max_steps: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(LabError::Config("geodesic tolerances must be positive".into()));
        }
        if self.max_steps < 100 {
            return Err(LabError::Config("geodesics.max_steps must be at least 100".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicEnd<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub steps: usize,
    /// Largest `|g(x',x') − g(v,v)| / g(v,v)` seen at accepted steps.
    pub energy_drift: f64,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// State `(y, y')` of the deviation `x(t) = p + t v + y(t)`.
type State<T> = [T; 6];

fn energy(metric: &MetricField, x: &[f64; 3], u: &[f64; 3]) -> f64 {
    bilinear(&metric.metric_t(x), u, u)
}

/// Integrates `x'' + Γ(x)(x', x') = 0` with `x(0) = p`, `x'(0) = v` over `t ∈ [0, 1]`.
pub fn integrate_geodesic<T: Real>(
    metric: &MetricField,
    p: &Vec3<T>,
    v: &Vec3<T>,
    cfg: &GeodesicConfig,
) -> Result<GeodesicEnd<T>> {
    let p0 = re3(p);
    let v0 = re3(v);
    let e0 = energy(metric, &p0, &v0);
    if e0 == 0.0 {
        return Ok(GeodesicEnd {
            position: *p,
            velocity: *v,
            steps: 0,
            energy_drift: 0.0,
        });
    }
    let rhs = |t: f64, s: &State<T>| -> Result<State<T>> {
        let mut x = zeros3::<T>();
        let mut u = zeros3::<T>();
        for k in 0..3 {
            x[k] = p[k] + v[k] * t + s[k];
            u[k] = v[k] + s[3 + k];
        }
        let xr = re3(&x);
        if !metric.domain_guard(&xr) {
            return Err(LabError::DomainExit { t, point: xr });
        }
        let acc = metric.connection(&x, &u, &u);
        Ok([s[3], s[4], s[5], -acc[0], -acc[1], -acc[2]])
    };

    let mut t = 0.0;
    let mut s: State<T> = [T::zero(); 6];
    let mut k1 = rhs(0.0, &s)?;
    let mut h: f64 = 0.25;
    let mut steps = 0usize;
    let mut drift: f64 = 0.0;
    while t < 1.0 {
        if steps >= cfg.max_steps {
            return Err(LabError::StepLimit {
                max_steps: cfg.max_steps,
            });
        }
        steps += 1;
        let last = t + h >= 1.0;
        if last {
            h = 1.0 - t;
        }
        let mut k = [k1; 7];
        let mut stage_err = None;
        for i in 1..7 {
            let mut si = s;
            for (comp, sic) in si.iter_mut().enumerate() {
                let mut acc = T::zero();
                for j in 0..i {
                    if A[i][j] != 0.0 {
                        acc += k[j][comp] * A[i][j];
                    }
                }
                *sic += acc * h;
            }
            match rhs(t + C[i] * h, &si) {
                Ok(v) => k[i] = v,
                Err(e) => {
                    stage_err = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = stage_err {
            // A stage left the chart: retry shorter unless the step is already tiny.
            if h < 1e-10 {
                return Err(e);
            }
            h *= 0.25;
            continue;
        }
        let mut s_new = s;
        let mut err = [0.0f64; 6];
        for comp in 0..6 {
            let mut acc = T::zero();
            let mut e = 0.0;
            for i in 0..6 {
                if A[6][i] != 0.0 {
                    acc += k[i][comp] * A[6][i];
                }
            }
            for i in 0..7 {
                let b5 = if i < 6 { A[6][i] } else { 0.0 };
                e += (b5 - B4[i]) * k[i][comp].re();
            }
            s_new[comp] += acc * h;
            err[comp] = e * h;
        }
        let mut err_norm: f64 = 0.0;
        for block in 0..2 {
            let mut scale: f64 = 0.0;
            for c in 0..3 {
                let i = 3 * block + c;
                scale = scale.max(s[i].re().abs()).max(s_new[i].re().abs());
            }
            let tol = cfg.abs_tol + cfg.rel_tol * scale;
            for c in 0..3 {
                err_norm = err_norm.max(err[3 * block + c].abs() / tol);
            }
        }
        if err_norm <= 1.0 {
            t = if last { 1.0 } else { t + h };
            s = s_new;
            k1 = k[6];
            let mut x = [0.0; 3];
            let mut u = [0.0; 3];
            for c in 0..3 {
                x[c] = p0[c] + v0[c] * t + s[c].re();
                u[c] = v0[c] + s[3 + c].re();
            }
            drift = drift.max(((energy(metric, &x, &u) - e0) / e0).abs());
        }
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    let mut position = zeros3::<T>();
    let mut velocity = zeros3::<T>();
    for c in 0..3 {
        position[c] = p[c] + v[c] + s[c];
        velocity[c] = v[c] + s[3 + c];
    }
    Ok(GeodesicEnd {
        position,
        velocity,
        steps,
        energy_drift: drift,
    })
}

/// `Exp_p(v)` in chart coordinates.
pub fn exp_map(
    metric: &MetricField,
    p: &[f64; 3],
    v: &[f64; 3],
    cfg: &GeodesicConfig,
) -> Result<[f64; 3]> {
    metric.check_domain(p)?;
    Ok(integrate_geodesic(metric, p, v, cfg)?.position)
}

/// A scalar function on the unit sphere, evaluated at frame-component unit vectors.
pub trait Perturbation: Sync {
    fn value<T: Real>(&self, theta: &Vec3<T>) -> T;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPerturbation;

impl Perturbation for ZeroPerturbation {
    fn value<T: Real>(&self, _theta: &Vec3<T>) -> T {
        T::zero()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantPerturbation(pub f64);

impl Perturbation for ConstantPerturbation {
    fn value<T: Real>(&self, _theta: &Vec3<T>) -> T {
        T::cst(self.0)
    }
}

/// `Θᵀ A Θ + c`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticPerturbation {
    pub a: Mat3<f64>,
    pub c: f64,
}

impl Perturbation for QuadraticPerturbation {
    fn value<T: Real>(&self, theta: &Vec3<T>) -> T {
        let mut acc = T::cst(self.c);
        for i in 0..3 {
            for j in 0..3 {
                if self.a[i][j] != 0.0 {
                    acc += theta[i] * theta[j] * self.a[i][j];
                }
            }
        }
        acc
    }
}

/// `factor · inner`.
#[derive(Clone, Copy, Debug)]
pub struct Scaled<'a, P> {
    pub inner: &'a P,
    pub factor: f64,
}

impl<P: Perturbation> Perturbation for Scaled<'_, P> {
    fn value<T: Real>(&self, theta: &Vec3<T>) -> T {
        self.inner.value(theta) * self.factor
    }
}

/// Unit vector of the polar parametrisation.
pub fn polar_direction<T: Real>(theta1: T, theta2: T) -> Vec3<T> {
    let s = theta1.sin();
    [s * theta2.cos(), s * theta2.sin(), theta1.cos()]
}

#[derive(Clone, Debug)]
pub struct EmbeddedPoint<T> {
    pub position: Vec3<T>,
    /// Chart vector pointing away from the enclosed region.
    pub outward: [f64; 3],
    pub energy_drift: f64,
}

/// A sphere parametrised by the polar angles.
pub trait Embedding: Sync {
    fn point<T: Real>(&self, theta1: T, theta2: T) -> Result<EmbeddedPoint<T>>;
}

/// `Θ ↦ Exp_p[ρ (1 − w(Θ)) Θ]`, `Θ` taken in the orthonormal frame at `p`.
pub struct PerturbedSphere<'a, P: Perturbation> {
    pub metric: &'a MetricField,
    pub p: [f64; 3],
    pub frame: Mat3<f64>,
    pub rho: f64,
    pub w: &'a P,
    pub cfg: GeodesicConfig,
}

impl<'a, P: Perturbation> PerturbedSphere<'a, P> {
    pub fn new(
        metric: &'a MetricField,
        p: &[f64; 3],
        rho: f64,
        w: &'a P,
        cfg: &GeodesicConfig,
    ) -> Result<Self> {
        let frame = metric.orthonormal_frame(p)?;
        Ok(Self::with_frame(metric, p, frame, rho, w, cfg))
    }

    pub fn with_frame(
        metric: &'a MetricField,
        p: &[f64; 3],
        frame: Mat3<f64>,
        rho: f64,
        w: &'a P,
        cfg: &GeodesicConfig,
    ) -> Self {
        PerturbedSphere {
            metric,
            p: *p,
            frame,
            rho,
            w,
            cfg: *cfg,
        }
    }
}

impl<P: Perturbation> Embedding for PerturbedSphere<'_, P> {
    fn point<T: Real>(&self, theta1: T, theta2: T) -> Result<EmbeddedPoint<T>> {
        let dir = polar_direction(theta1, theta2);
        let w = self.w.value(&dir);
        if w.re().abs() >= 1.0 {
            return Err(LabError::PerturbationTooLarge { sup: w.re().abs() });
        }
        let radius = (-w + 1.0) * self.rho;
        let bound = self.metric.injectivity_bound();
        if radius.re() >= bound {
            return Err(LabError::RadiusOutOfRange {
                rho: radius.re(),
                limit: bound,
            });
        }
        let mut v = zeros3::<T>();
        for mu in 0..3 {
            for k in 0..3 {
                v[k] += dir[mu] * radius * self.frame[mu][k];
            }
        }
        let end = integrate_geodesic(self.metric, &lift3(&self.p), &v, &self.cfg)?;
        Ok(EmbeddedPoint {
            position: end.position,
            outward: re3(&end.velocity),
            energy_drift: end.energy_drift,
        })
    }
}

/// Coordinate sphere `center + r Θ` of the chart.
#[derive(Clone, Copy, Debug)]
pub struct CoordinateSphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Embedding for CoordinateSphere {
    fn point<T: Real>(&self, theta1: T, theta2: T) -> Result<EmbeddedPoint<T>> {
        let dir = polar_direction(theta1, theta2);
        let mut position = lift3::<T>(&self.center);
        for k in 0..3 {
            position[k] += dir[k] * self.radius;
        }
        Ok(EmbeddedPoint {
            position,
            outward: re3(&dir),
            energy_drift: 0.0,
        })
    }
}

/// How many angular derivatives to carry through the embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOrder {
    Value,
    First,
    Second,
}

/// Embedding data on a grid, independent of any metric.
#[derive(Clone, Debug)]
pub struct EmbeddingSample {
    pub positions: Vec<[f64; 3]>,
    /// `∂X/∂θ^i`; empty for [`JetOrder::Value`].
    pub tangents: Vec<[[f64; 3]; 2]>,
    /// `∂²X/∂θ^i∂θ^j`; empty unless [`JetOrder::Second`].
    pub second: Vec<[[[f64; 3]; 2]; 2]>,
    pub outward: Vec<[f64; 3]>,
    pub max_energy_drift: f64,
}

/// Samples an embedding at every grid node. Output order follows the grid.
pub fn sample_embedding<E: Embedding>(
    emb: &E,
    grid: &SphereGrid,
    order: JetOrder,
) -> Result<EmbeddingSample> {
    type Node = ([f64; 3], Option<[[f64; 3]; 2]>, Option<[[[f64; 3]; 2]; 2]>, [f64; 3], f64);
    let nodes: Vec<Result<Node>> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let (t1, t2) = (grid.nodes[n].theta1, grid.nodes[n].theta2);
            match order {
                JetOrder::Value => {
                    let e = emb.point(t1, t2)?;
                    Ok((e.position, None, None, e.outward, e.energy_drift))
                }
                JetOrder::First => {
                    let e = emb.point(Jet1::variable(t1, 0), Jet1::variable(t2, 1))?;
                    let x = e.position;
                    let pos = [x[0].v, x[1].v, x[2].v];
                    let mut z = [[0.0; 3]; 2];
                    for i in 0..2 {
                        for k in 0..3 {
                            z[i][k] = x[k].d[i];
                        }
                    }
                    Ok((pos, Some(z), None, e.outward, e.energy_drift))
                }
                JetOrder::Second => {
                    let e = emb.point::<Jet2>(jet2_variable(t1, 0), jet2_variable(t2, 1))?;
                    let x = e.position;
                    let pos = [jet2_value(&x[0]), jet2_value(&x[1]), jet2_value(&x[2])];
                    let mut z = [[0.0; 3]; 2];
                    let mut zz = [[[0.0; 3]; 2]; 2];
                    for i in 0..2 {
                        for k in 0..3 {
                            z[i][k] = jet2_grad(&x[k], i);
                            for j in 0..2 {
                                zz[i][j][k] = jet2_hess(&x[k], i, j);
                            }
                        }
                    }
                    Ok((pos, Some(z), Some(zz), e.outward, e.energy_drift))
                }
            }
        })
        .collect();
    let mut out = EmbeddingSample {
        positions: Vec::with_capacity(grid.len()),
        tangents: Vec::new(),
        second: Vec::new(),
        outward: Vec::with_capacity(grid.len()),
        max_energy_drift: 0.0,
    };
    for node in nodes {
        let (pos, z, zz, outward, drift) = node?;
        out.positions.push(pos);
        if let Some(z) = z {
            out.tangents.push(z);
        }
        if let Some(zz) = zz {
            out.second.push(zz);
        }
        out.outward.push(outward);
        out.max_energy_drift = out.max_energy_drift.max(drift);
    }
    Ok(out)
}

/// Positions `Exp_p[ρ(1 − w(Θ))Θ]` over the grid.
pub fn embed_sphere<P: Perturbation>(
    metric: &MetricField,
    p: &[f64; 3],
    rho: f64,
    w: &P,
    grid: &SphereGrid,
    cfg: &GeodesicConfig,
) -> Result<Vec<[f64; 3]>> {
    metric.check_domain(p)?;
    let emb = PerturbedSphere::new(metric, p, rho, w, cfg)?;
    Ok(sample_embedding(&emb, grid, JetOrder::Value)?.positions)
}

/// Tangents `Z_i = ∂X/∂θ^i` by fourth-order differences on the grid.
pub fn surface_tangents(positions: &[[f64; 3]], grid: &SphereGrid) -> Result<Vec<[[f64; 3]; 2]>> {
    grid.require_fd()?;
    if positions.len() != grid.len() {
        return Err(LabError::Config(format!(
            "{} positions for a grid of {} nodes",
            positions.len(),
            grid.len()
        )));
    }
    let d1 = grid.fd_theta(positions);
    let d2 = grid.fd_phi(positions);
    Ok(d1.into_iter().zip(d2).map(|(a, b)| [a, b]).collect())
}
