//! Analytic Riemannian 3-metrics on a single chart and their curvature.
//!
//! Conventions: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`,
//! `Rm(X,Y,Z,W) = g(R(Z,W)Y, X)` stored as `rm[a][b][c][d]`, `Ric_bd = g^{ac} Rm_abcd`.
//! With these a space of constant sectional curvature `K` has
//! `Rm_abcd = K (g_ac g_bd − g_ad g_bc)` and `Ric = 2K g`.
//!
//! The built-in kinds carry closed-form connections and curvature. The conformal and
//! polynomial kinds are differentiated with forward-mode dual numbers, so every
//! derivative is exact up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::*;
use crate::real::{Dual, Real};

/// Fraction of the Poincaré-ball radius admitted by the hyperbolic chart guard.
pub const HYPERBOLIC_BALL_FRACTION: f64 = 0.98;
/// Schwarzschild guard `r > 2m (1 + margin)`.
pub const SCHWARZSCHILD_HORIZON_MARGIN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: [u32; 3],
}

/// Polynomial in the chart coordinates `x, y, z`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<Monomial>);

impl Polynomial {
    pub fn monomial(coeff: f64, powers: [u32; 3]) -> Self {
        Polynomial(vec![Monomial { coeff, powers }])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|m| m.powers.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval<T: Real>(&self, x: &Vec3<T>) -> T {
        let mut acc = T::zero();
        for m in &self.0 {
            let mut t = T::cst(m.coeff);
            for k in 0..3 {
                if m.powers[k] > 0 {
                    t *= x[k].powi(m.powers[k] as i32);
                }
            }
            acc += t;
        }
        acc
    }
}

/// Symmetric polynomial perturbation `h` with `g = δ + h`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymmetricPolynomial {
    pub xx: Polynomial,
    pub xy: Polynomial,
    pub xz: Polynomial,
    pub yy: Polynomial,
    pub yz: Polynomial,
    pub zz: Polynomial,
}

impl SymmetricPolynomial {
    fn entry(&self, i: usize, j: usize) -> &Polynomial {
        match (i.min(j), i.max(j)) {
            (0, 0) => &self.xx,
            (0, 1) => &self.xy,
            (0, 2) => &self.xz,
            (1, 1) => &self.yy,
            (1, 2) => &self.yz,
            _ => &self.zz,
        }
    }

    fn degree(&self) -> u32 {
        [&self.xx, &self.xy, &self.xz, &self.yy, &self.yz, &self.zz]
            .iter()
            .map(|p| p.degree())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricKind {
    Euclidean,
    /// Round 3-sphere of the given radius in a stereographic chart.
    RoundSphere { radius: f64 },
    /// Hyperbolic space of the given curvature radius in the Poincaré ball.
    Hyperbolic { radius: f64 },
    /// Spatial Schwarzschild in the areal chart, pulled back to Cartesian coordinates.
    Schwarzschild { mass: f64 },
    /// `e^{2φ} δ`.
    Conformal { phi: Polynomial },
    /// `δ + h`, `h` of degree at most 4.
    PolynomialPerturbation { h: SymmetricPolynomial },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub kind: MetricKind,
    /// Caller-supplied bound on admissible geodesic radii.
    pub injectivity_bound: Option<f64>,
}

fn d3<T: Real>(x: &Vec3<T>) -> Vec3<Dual<T, 3>> {
    [
        Dual::variable(x[0], 0),
        Dual::variable(x[1], 1),
        Dual::variable(x[2], 2),
    ]
}

/// Seeds `x` for value, gradient and Hessian with respect to the chart.
fn d3d3(p: &[f64; 3]) -> Vec3<Dual<Dual<f64, 3>, 3>> {
    let mut out = [Dual::<Dual<f64, 3>, 3>::cst(0.0); 3];
    for (i, o) in out.iter_mut().enumerate() {
        let mut d = [Dual::<f64, 3>::cst(0.0); 3];
        d[i] = Dual::cst(1.0);
        *o = Dual {
            v: Dual::variable(p[i], i),
            d,
        };
    }
    out
}

/// `Rm = P ⊙ g` with `P = Ric − Sc g / 4`, valid in dimension three.
fn riemann_from_ricci<T: Real>(ric: &Mat3<T>, sc: T, g: &Mat3<T>) -> Tensor4<T> {
    let mut p = *ric;
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] -= g[i][j] * sc * 0.25;
        }
    }
    let mut rm = [[[[T::zero(); 3]; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    rm[a][b][c][d] = p[a][c] * g[b][d] + p[b][d] * g[a][c]
                        - p[a][d] * g[b][c]
                        - p[b][c] * g[a][d];
                }
            }
        }
    }
    rm
}

impl MetricField {
    pub fn new(kind: MetricKind) -> Result<Self> {
        let m = MetricField {
            kind,
            injectivity_bound: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn euclidean() -> Self {
        MetricField {
            kind: MetricKind::Euclidean,
            injectivity_bound: None,
        }
    }

    pub fn round_sphere(radius: f64) -> Self {
        MetricField {
            kind: MetricKind::RoundSphere { radius },
            injectivity_bound: None,
        }
    }

    pub fn hyperbolic(radius: f64) -> Self {
        MetricField {
            kind: MetricKind::Hyperbolic { radius },
            injectivity_bound: None,
        }
    }

    pub fn schwarzschild(mass: f64) -> Self {
        MetricField {
            kind: MetricKind::Schwarzschild { mass },
            injectivity_bound: None,
        }
    }

    pub fn conformal(phi: Polynomial) -> Self {
        MetricField {
            kind: MetricKind::Conformal { phi },
            injectivity_bound: None,
        }
    }

    pub fn polynomial(h: SymmetricPolynomial) -> Self {
        MetricField {
            kind: MetricKind::PolynomialPerturbation { h },
            injectivity_bound: None,
        }
    }

    pub fn with_injectivity_bound(mut self, bound: f64) -> Self {
        self.injectivity_bound = Some(bound);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(LabError::InvalidMetric(format!("{name} must be positive, got {v}")))
            }
        };
        match &self.kind {
            MetricKind::RoundSphere { radius } | MetricKind::Hyperbolic { radius } => {
                positive("radius", *radius)?
            }
            MetricKind::Schwarzschild { mass } => positive("mass", *mass)?,
            MetricKind::PolynomialPerturbation { h } if h.degree() > 4 => {
                return Err(LabError::InvalidMetric(format!(
                    "perturbation degree {} exceeds 4",
                    h.degree()
                )))
            }
            _ => {}
        }
        if let Some(b) = self.injectivity_bound {
            positive("injectivity_bound", b)?;
        }
        Ok(())
    }

    /// Constant sectional curvature of the space forms, `None` otherwise.
    pub fn constant_curvature(&self) -> Option<f64> {
        match self.kind {
            MetricKind::Euclidean => Some(0.0),
            MetricKind::RoundSphere { radius } => Some(1.0 / (radius * radius)),
            MetricKind::Hyperbolic { radius } => Some(-1.0 / (radius * radius)),
            _ => None,
        }
    }

    /// Conservative bound on geodesic radii: the caller's value when supplied,
    /// else `π R / 2` on the sphere and unbounded elsewhere.
    pub fn injectivity_bound(&self) -> f64 {
        if let Some(b) = self.injectivity_bound {
            return b;
        }
        match self.kind {
            MetricKind::RoundSphere { radius } => std::f64::consts::FRAC_PI_2 * radius,
            _ => f64::INFINITY,
        }
    }

    /// Chart validity of `x`.
    pub fn domain_guard(&self, x: &[f64; 3]) -> bool {
        if !x.iter().all(|c| c.is_finite()) {
            return false;
        }
        let r2 = dot(x, x);
        match &self.kind {
            MetricKind::Euclidean | MetricKind::RoundSphere { .. } | MetricKind::Conformal { .. } => {
                true
            }
            MetricKind::Hyperbolic { radius } => {
                r2.sqrt() < 2.0 * radius * HYPERBOLIC_BALL_FRACTION
            }
            MetricKind::Schwarzschild { mass } => {
                r2.sqrt() > 2.0 * mass * (1.0 + SCHWARZSCHILD_HORIZON_MARGIN)
            }
            MetricKind::PolynomialPerturbation { .. } => {
                is_positive_definite(&self.metric_t(x))
            }
        }
    }

    pub fn check_domain(&self, x: &[f64; 3]) -> Result<()> {
        if self.domain_guard(x) {
            Ok(())
        } else {
            Err(LabError::Domain {
                point: *x,
                reason: self.guard_description(),
            })
        }
    }

    fn guard_description(&self) -> String {
        match &self.kind {
            MetricKind::Hyperbolic { radius } => format!(
                "|x| < {} required",
                2.0 * radius * HYPERBOLIC_BALL_FRACTION
            ),
            MetricKind::Schwarzschild { mass } => format!(
                "r > {} required",
                2.0 * mass * (1.0 + SCHWARZSCHILD_HORIZON_MARGIN)
            ),
            MetricKind::PolynomialPerturbation { .. } => "metric not positive definite".into(),
            _ => "non-finite coordinates".into(),
        }
    }

    /// `ψ` and `∂ ln ψ` for the conformally flat space forms, `g = ψ² δ`.
    fn space_form_factor<T: Real>(&self, k: f64, x: &Vec3<T>) -> (T, Vec3<T>) {
        let psi = (dot(x, x) * (k * 0.25) + 1.0).recip();
        let f = [
            x[0] * psi * (-0.5 * k),
            x[1] * psi * (-0.5 * k),
            x[2] * psi * (-0.5 * k),
        ];
        (psi, f)
    }

    /// Metric components `g_{μν}(x)`. No domain check.
    pub fn metric_t<T: Real>(&self, x: &Vec3<T>) -> Mat3<T> {
        match &self.kind {
            MetricKind::Euclidean => identity(),
            MetricKind::RoundSphere { .. } | MetricKind::Hyperbolic { .. } => {
                let k = self.constant_curvature().unwrap();
                let (psi, _) = self.space_form_factor(k, x);
                let mut g = zeros33();
                for (i, row) in g.iter_mut().enumerate() {
                    row[i] = psi * psi;
                }
                g
            }
            MetricKind::Schwarzschild { mass } => {
                let r = dot(x, x).sqrt();
                let a = (r * r * (r - 2.0 * mass)).recip() * (2.0 * mass);
                let mut g = identity();
                for i in 0..3 {
                    for j in 0..3 {
                        g[i][j] += a * x[i] * x[j];
                    }
                }
                g
            }
            MetricKind::Conformal { phi } => {
                let e = (phi.eval(x) * 2.0).exp();
                let mut g = zeros33();
                for (i, row) in g.iter_mut().enumerate() {
                    row[i] = e;
                }
                g
            }
            MetricKind::PolynomialPerturbation { h } => {
                let mut g = identity();
                for i in 0..3 {
                    for j in 0..3 {
                        g[i][j] += h.entry(i, j).eval(x);
                    }
                }
                g
            }
        }
    }

    /// Inverse metric, closed form where available.
    pub fn inverse_metric_t<T: Real>(&self, x: &Vec3<T>) -> Mat3<T> {
        match &self.kind {
            MetricKind::Schwarzschild { mass } => {
                let r = dot(x, x).sqrt();
                let c = (r * r * r).recip() * (-2.0 * mass);
                let mut gi = identity();
                for i in 0..3 {
                    for j in 0..3 {
                        gi[i][j] += c * x[i] * x[j];
                    }
                }
                gi
            }
            MetricKind::PolynomialPerturbation { .. } => inv3(&self.metric_t(x)),
            _ => {
                let g = self.metric_t(x);
                let mut gi = zeros33();
                for i in 0..3 {
                    gi[i][i] = g[i][i].recip();
                }
                gi
            }
        }
    }

    /// Contracted connection `Γ^σ_{μν} u^μ v^ν`.
    pub fn connection<T: Real>(&self, x: &Vec3<T>, u: &Vec3<T>, v: &Vec3<T>) -> Vec3<T> {
        let conformal = |f: &Vec3<T>| {
            let fu = dot(f, u);
            let fv = dot(f, v);
            let uv = dot(u, v);
            [
                u[0] * fv + v[0] * fu - uv * f[0],
                u[1] * fv + v[1] * fu - uv * f[1],
                u[2] * fv + v[2] * fu - uv * f[2],
            ]
        };
        match &self.kind {
            MetricKind::Euclidean => zeros3(),
            MetricKind::RoundSphere { .. } | MetricKind::Hyperbolic { .. } => {
                let k = self.constant_curvature().unwrap();
                let (_, f) = self.space_form_factor(k, x);
                conformal(&f)
            }
            MetricKind::Conformal { phi } => {
                let p = phi.eval(&d3(x));
                conformal(&p.d)
            }
            MetricKind::Schwarzschild { mass } => {
                let m = *mass;
                let r = dot(x, x).sqrt();
                let (a, ap) = schwarzschild_a(m, r);
                let xu = dot(x, u);
                let xv = dot(x, v);
                let uv = dot(u, v);
                let lapse2 = (r.recip() * (-2.0 * m)) + 1.0;
                let s = xu * xv * ap * lapse2 * r.recip() * 0.5 + uv * a * lapse2;
                [x[0] * s, x[1] * s, x[2] * s]
            }
            MetricKind::PolynomialPerturbation { .. } => {
                let gam = self.christoffel_t(x);
                let mut out = zeros3();
                for s in 0..3 {
                    for m in 0..3 {
                        for n in 0..3 {
                            out[s] += gam[s][m][n] * u[m] * v[n];
                        }
                    }
                }
                out
            }
        }
    }

    /// Full Christoffel array `Γ^σ_{μν}` as `gamma[σ][μ][ν]`. No domain check.
    pub fn christoffel_t<T: Real>(&self, x: &Vec3<T>) -> Tensor3<T> {
        let mut gam = [[[T::zero(); 3]; 3]; 3];
        match &self.kind {
            MetricKind::PolynomialPerturbation { .. } => {
                let gd = self.metric_t(&d3(x));
                let gi = inv3(&self.metric_t(x));
                // first kind: Γ_kij = (∂_i g_kj + ∂_j g_ki − ∂_k g_ij) / 2
                let mut first = [[[T::zero(); 3]; 3]; 3];
                for k in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            first[k][i][j] =
                                (gd[k][j].d[i] + gd[k][i].d[j] - gd[i][j].d[k]) * 0.5;
                        }
                    }
                }
                for s in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            let mut acc = T::zero();
                            for k in 0..3 {
                                acc += gi[s][k] * first[k][i][j];
                            }
                            gam[s][i][j] = acc;
                        }
                    }
                }
            }
            _ => {
                let e = |i: usize| {
                    let mut v = zeros3::<T>();
                    v[i] = T::cst(1.0);
                    v
                };
                for i in 0..3 {
                    for j in i..3 {
                        let c = self.connection(x, &e(i), &e(j));
                        for s in 0..3 {
                            gam[s][i][j] = c[s];
                            gam[s][j][i] = c[s];
                        }
                    }
                }
            }
        }
        gam
    }

    /// Lowered curvature tensor `Rm_abcd`.
    pub fn riemann_t<T: Real>(&self, x: &Vec3<T>) -> Tensor4<T> {
        match &self.kind {
            MetricKind::Euclidean => [[[[T::zero(); 3]; 3]; 3]; 3],
            MetricKind::RoundSphere { .. }
            | MetricKind::Hyperbolic { .. }
            | MetricKind::Schwarzschild { .. } => {
                let g = self.metric_t(x);
                riemann_from_ricci(&self.ricci_t(x), self.scalar_t(x), &g)
            }
            MetricKind::Conformal { .. } | MetricKind::PolynomialPerturbation { .. } => {
                let gd = self.christoffel_t(&d3(x));
                let g = self.metric_t(x);
                let mut up = [[[[T::zero(); 3]; 3]; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..3 {
                            for d in 0..3 {
                                let mut v = gd[a][d][b].d[c] - gd[a][c][b].d[d];
                                for e in 0..3 {
                                    v += gd[a][c][e].v * gd[e][d][b].v
                                        - gd[a][d][e].v * gd[e][c][b].v;
                                }
                                up[a][b][c][d] = v;
                            }
                        }
                    }
                }
                let mut rm = [[[[T::zero(); 3]; 3]; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..3 {
                            for d in 0..3 {
                                let mut v = T::zero();
                                for e in 0..3 {
                                    v += g[a][e] * up[e][b][c][d];
                                }
                                rm[a][b][c][d] = v;
                            }
                        }
                    }
                }
                rm
            }
        }
    }

    /// Ricci tensor in chart components.
    pub fn ricci_t<T: Real>(&self, x: &Vec3<T>) -> Mat3<T> {
        match &self.kind {
            MetricKind::Euclidean => zeros33(),
            MetricKind::RoundSphere { .. } | MetricKind::Hyperbolic { .. } => {
                let k = self.constant_curvature().unwrap();
                let mut g = self.metric_t(x);
                for row in g.iter_mut() {
                    for v in row.iter_mut() {
                        *v = *v * (2.0 * k);
                    }
                }
                g
            }
            MetricKind::Schwarzschild { mass } => {
                let m = *mass;
                let r = dot(x, x).sqrt();
                let g = self.metric_t(x);
                let c = (r * r * r).recip() * m;
                let nn = (r * (r - 2.0 * m)).recip() * 3.0;
                let mut ric = zeros33();
                for i in 0..3 {
                    for j in 0..3 {
                        ric[i][j] = c * (g[i][j] - nn * x[i] * x[j]);
                    }
                }
                ric
            }
            _ => {
                let rm = self.riemann_t(x);
                let gi = self.inverse_metric_t(x);
                let mut ric = zeros33();
                for b in 0..3 {
                    for d in 0..3 {
                        let mut v = T::zero();
                        for a in 0..3 {
                            for c in 0..3 {
                                v += gi[a][c] * rm[a][b][c][d];
                            }
                        }
                        ric[b][d] = v;
                    }
                }
                ric
            }
        }
    }

    /// Scalar curvature.
    pub fn scalar_t<T: Real>(&self, x: &Vec3<T>) -> T {
        match &self.kind {
            MetricKind::Euclidean | MetricKind::Schwarzschild { .. } => T::zero(),
            MetricKind::RoundSphere { .. } | MetricKind::Hyperbolic { .. } => {
                T::cst(6.0 * self.constant_curvature().unwrap())
            }
            _ => {
                let ric = self.ricci_t(x);
                let gi = self.inverse_metric_t(x);
                let mut s = T::zero();
                for a in 0..3 {
                    for b in 0..3 {
                        s += gi[a][b] * ric[a][b];
                    }
                }
                s
            }
        }
    }

    pub fn metric_at(&self, x: &[f64; 3]) -> Result<Mat3<f64>> {
        self.check_domain(x)?;
        Ok(self.metric_t(x))
    }

    pub fn christoffel_at(&self, x: &[f64; 3]) -> Result<Tensor3<f64>> {
        self.check_domain(x)?;
        Ok(self.christoffel_t(x))
    }

    pub fn riemann_at(&self, x: &[f64; 3]) -> Result<Tensor4<f64>> {
        self.check_domain(x)?;
        Ok(self.riemann_t(x))
    }

    pub fn ricci_at(&self, x: &[f64; 3]) -> Result<Mat3<f64>> {
        self.check_domain(x)?;
        Ok(self.ricci_t(x))
    }

    pub fn scalar_at(&self, x: &[f64; 3]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.scalar_t(x))
    }

    /// Chart gradient `∂_a Sc`.
    pub fn scalar_gradient_chart(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        self.check_domain(x)?;
        Ok(self.scalar_t(&d3(x)).d)
    }

    /// `(div Ric)_c = g^{ab} ∇_a Ric_bc` in chart components.
    pub fn ricci_divergence_chart(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        self.check_domain(x)?;
        let rd = self.ricci_t(&d3(x));
        let gam = self.christoffel_t(x);
        let gi = self.inverse_metric_t(x);
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    let mut nab = rd[b][c].d[a];
                    for e in 0..3 {
                        nab -= gam[e][a][b] * rd[e][c].v + gam[e][a][c] * rd[b][e].v;
                    }
                    *o += gi[a][b] * nab;
                }
            }
        }
        Ok(out)
    }

    /// Gram–Schmidt of the chart basis `(∂₁, ∂₂, ∂₃)` under `g(p)`; `frame[μ]` is `E_μ`.
    pub fn orthonormal_frame(&self, p: &[f64; 3]) -> Result<Mat3<f64>> {
        let g = self.metric_at(p)?;
        let mut frame = [[0.0; 3]; 3];
        for i in 0..3 {
            let mut v = [0.0; 3];
            v[i] = 1.0;
            for j in 0..i {
                let c = bilinear(&g, &v, &frame[j]);
                for k in 0..3 {
                    v[k] -= c * frame[j][k];
                }
            }
            let n = bilinear(&g, &v, &v).sqrt();
            for k in 0..3 {
                frame[i][k] = v[k] / n;
            }
        }
        Ok(frame)
    }
}

/// `A(r) = 2m / (r² (r − 2m))` and `A'(r)` for the Cartesian Schwarzschild metric.
fn schwarzschild_a<T: Real>(m: f64, r: T) -> (T, T) {
    let den = r * r * (r - 2.0 * m);
    let a = den.recip() * (2.0 * m);
    let dden = r * r * 3.0 - r * (4.0 * m);
    let ap = -(a * dden / den);
    (a, ap)
}

/// Covariant Laplacian `g^{ab} ∇_a ∇_b Sc` at `p`.
pub fn scalar_laplacian(metric: &MetricField, p: &[f64; 3]) -> Result<f64> {
    metric.check_domain(p)?;
    let s = metric.scalar_t(&d3d3(p));
    let gam = metric.christoffel_t(p);
    let gi = metric.inverse_metric_t(p);
    let grad = s.v.d;
    let mut lap = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let mut h = s.d[a].d[b];
            for c in 0..3 {
                h -= gam[c][a][b] * grad[c];
            }
            lap += gi[a][b] * h;
        }
    }
    Ok(lap)
}

/// Curvature data at a point, tensors in the orthonormal frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvaturePacket {
    pub point: [f64; 3],
    /// `frame[μ]` holds the chart components of `E_μ`.
    pub frame: Mat3<f64>,
    pub ricci: Mat3<f64>,
    pub scalar: f64,
    pub traceless: Mat3<f64>,
    pub traceless_norm_sq: f64,
    pub scalar_laplacian: f64,
    pub scalar_gradient: [f64; 3],
    pub riemann: Tensor4<f64>,
}

impl CurvaturePacket {
    /// `Ric(Θ, Θ)` for a frame-component vector.
    pub fn ricci_quadratic<T: Real>(&self, theta: &Vec3<T>) -> T {
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                acc += theta[i] * theta[j] * self.ricci[i][j];
            }
        }
        acc
    }

    /// Frame vector to chart components.
    pub fn to_chart(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for mu in 0..3 {
            for k in 0..3 {
                out[k] += v[mu] * self.frame[mu][k];
            }
        }
        out
    }

    /// `‖Ric‖² − Sc²/3`, the identity-based value of `‖S‖²`.
    pub fn traceless_norm_identity(&self) -> f64 {
        let mut r2 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                r2 += self.ricci[i][j] * self.ricci[i][j];
            }
        }
        r2 - self.scalar * self.scalar / 3.0
    }
}

fn to_frame2(frame: &Mat3<f64>, t: &Mat3<f64>) -> Mat3<f64> {
    let mut out = [[0.0; 3]; 3];
    for m in 0..3 {
        for n in 0..3 {
            out[m][n] = bilinear(t, &frame[m], &frame[n]);
        }
    }
    out
}

pub fn curvature_packet(metric: &MetricField, p: &[f64; 3]) -> Result<CurvaturePacket> {
    let frame = metric.orthonormal_frame(p)?;
    let ricci = to_frame2(&frame, &metric.ricci_t(p));
    let rm_chart = metric.riemann_t(p);
    let mut riemann = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    let mut v = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            for k in 0..3 {
                                for l in 0..3 {
                                    v += rm_chart[i][j][k][l]
                                        * frame[a][i]
                                        * frame[b][j]
                                        * frame[c][k]
                                        * frame[d][l];
                                }
                            }
                        }
                    }
                    riemann[a][b][c][d] = v;
                }
            }
        }
    }
    let scalar = metric.scalar_t(p);
    let mut traceless = ricci;
    let mut norm = 0.0;
    for i in 0..3 {
        traceless[i][i] -= scalar / 3.0;
    }
    for row in &traceless {
        for v in row {
            norm += v * v;
        }
    }
    let grad_chart = metric.scalar_gradient_chart(p)?;
    let scalar_gradient = [
        dot(&frame[0], &grad_chart),
        dot(&frame[1], &grad_chart),
        dot(&frame[2], &grad_chart),
    ];
    Ok(CurvaturePacket {
        point: *p,
        frame,
        ricci,
        scalar,
        traceless,
        traceless_norm_sq: norm,
        scalar_laplacian: scalar_laplacian(metric, p)?,
        scalar_gradient,
        riemann,
    })
}

/// Frame components of `div Ric`.
pub fn ricci_divergence(metric: &MetricField, p: &[f64; 3]) -> Result<[f64; 3]> {
    let frame = metric.orthonormal_frame(p)?;
    let d = metric.ricci_divergence_chart(p)?;
    Ok([dot(&frame[0], &d), dot(&frame[1], &d), dot(&frame[2], &d)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixtures() -> Vec<(MetricField, [f64; 3])> {
        vec![
            (MetricField::euclidean(), [1.0, 2.0, 3.0]),
            (MetricField::round_sphere(1.0), [0.3, -0.2, 0.5]),
            (MetricField::round_sphere(2.0), [0.7, 0.1, -0.4]),
            (MetricField::hyperbolic(1.0), [0.4, 0.3, -0.2]),
            (MetricField::schwarzschild(1.0), [2.0, -3.0, 1.5]),
            (
                MetricField::conformal(Polynomial(vec![
                    Monomial { coeff: 0.05, powers: [2, 0, 0] },
                    Monomial { coeff: -0.03, powers: [0, 1, 1] },
                    Monomial { coeff: 0.02, powers: [1, 1, 1] },
                ])),
                [0.4, -0.6, 0.9],
            ),
            (MetricField::polynomial(poly_fixture()), [0.3, 0.2, -0.5]),
        ]
    }

    fn poly_fixture() -> SymmetricPolynomial {
        SymmetricPolynomial {
            xx: Polynomial::monomial(0.1, [0, 2, 0]),
            xy: Polynomial::monomial(0.05, [0, 0, 2]),
            yz: Polynomial(vec![
                Monomial { coeff: 0.04, powers: [1, 1, 0] },
                Monomial { coeff: 0.01, powers: [2, 0, 2] },
            ]),
            zz: Polynomial::monomial(-0.08, [1, 0, 0]),
            ..Default::default()
        }
    }

    /// Christoffels from central differences of the metric, independent of the
    /// closed forms and of the dual-number path.
    fn fd_christoffel(m: &MetricField, x: &[f64; 3]) -> Tensor3<f64> {
        let h = 1e-4;
        let mut dg = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            let mut xp2 = *x;
            let mut xm2 = *x;
            xp[k] += h;
            xm[k] -= h;
            xp2[k] += 2.0 * h;
            xm2[k] -= 2.0 * h;
            let (gp, gm, gp2, gm2) = (
                m.metric_t(&xp),
                m.metric_t(&xm),
                m.metric_t(&xp2),
                m.metric_t(&xm2),
            );
            for i in 0..3 {
                for j in 0..3 {
                    dg[k][i][j] =
                        (8.0 * (gp[i][j] - gm[i][j]) - (gp2[i][j] - gm2[i][j])) / (12.0 * h);
                }
            }
        }
        let gi = inv3(&m.metric_t(x));
        let mut gam = [[[0.0; 3]; 3]; 3];
        for s in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        gam[s][i][j] +=
                            0.5 * gi[s][k] * (dg[i][k][j] + dg[j][k][i] - dg[k][i][j]);
                    }
                }
            }
        }
        gam
    }

    /// Ricci from central differences of the FD Christoffels.
    fn fd_ricci(m: &MetricField, x: &[f64; 3]) -> Mat3<f64> {
        let h = 1e-3;
        let mut dgam = [[[[0.0; 3]; 3]; 3]; 3];
        for c in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[c] += h;
            xm[c] -= h;
            let (gp, gm) = (fd_christoffel(m, &xp), fd_christoffel(m, &xm));
            for a in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        dgam[c][a][i][j] = (gp[a][i][j] - gm[a][i][j]) / (2.0 * h);
                    }
                }
            }
        }
        let gam = fd_christoffel(m, x);
        let mut ric = [[0.0; 3]; 3];
        for b in 0..3 {
            for d in 0..3 {
                let mut v = 0.0;
                for a in 0..3 {
                    v += dgam[a][a][d][b] - dgam[d][a][a][b];
                    for e in 0..3 {
                        v += gam[a][a][e] * gam[e][d][b] - gam[a][d][e] * gam[e][a][b];
                    }
                }
                ric[b][d] = v;
            }
        }
        ric
    }

    #[test]
    fn metric_examples() {
        let g = MetricField::euclidean().metric_at(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g, identity::<f64>());
        let s = MetricField::schwarzschild(1.0);
        let x = [4.0, 0.0, 0.0];
        let g = s.metric_at(&x).unwrap();
        assert!((g[0][0] - 2.0).abs() < 1e-14);
        assert!((g[1][1] - 1.0).abs() < 1e-14);
        let c = MetricField::conformal(Polynomial::monomial(0.1, [2, 0, 0]));
        let g = c.metric_at(&[1.0, 0.0, 0.0]).unwrap();
        assert!((g[2][2] - 0.2f64.exp()).abs() < 1e-14);
        assert_eq!(g[0][1], 0.0);
        assert!(s.metric_at(&[2.05, 0.0, 0.0]).is_err());
        assert!(MetricField::hyperbolic(1.0).metric_at(&[1.97, 0.0, 0.0]).is_err());
    }

    #[test]
    fn christoffel_vanishes_at_space_form_origin() {
        for m in [MetricField::round_sphere(1.5), MetricField::hyperbolic(0.7)] {
            let g = m.christoffel_at(&[0.0; 3]).unwrap();
            assert!(g.iter().flatten().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn christoffel_matches_finite_differences() {
        for (m, x) in fixtures() {
            let a = m.christoffel_at(&x).unwrap();
            let b = fd_christoffel(&m, &x);
            for s in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert!((a[s][i][j] - a[s][j][i]).abs() < 1e-15);
                        assert!(
                            (a[s][i][j] - b[s][i][j]).abs() < 1e-9,
                            "{:?} {s}{i}{j}: {} vs {}",
                            m.kind,
                            a[s][i][j],
                            b[s][i][j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn schwarzschild_radial_christoffel_closed_form() {
        // Γ^r_rr = -m / (r (r - 2m)) in the areal chart; along the x axis this is Γ^x_xx.
        let m = MetricField::schwarzschild(1.0);
        let g = m.christoffel_at(&[4.0, 0.0, 0.0]).unwrap();
        assert!((g[0][0][0] + 1.0 / 8.0).abs() < 1e-14);
        // Γ^r_θθ = -(r - 2m) minus its flat value -r, over r², gives Γ^x_yy = 2m/r².
        assert!((g[0][1][1] - 2.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn ricci_matches_finite_differences() {
        for (m, x) in fixtures() {
            let a = m.ricci_at(&x).unwrap();
            let b = fd_ricci(&m, &x);
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (a[i][j] - b[i][j]).abs() < 2e-6,
                        "{:?}: {:?} vs {:?}",
                        m.kind,
                        a,
                        b
                    );
                }
            }
        }
    }

    #[test]
    fn packet_examples() {
        let e = curvature_packet(&MetricField::euclidean(), &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(e.scalar, 0.0);
        assert_eq!(e.traceless_norm_sq, 0.0);
        assert_eq!(e.scalar_laplacian, 0.0);
        let s = curvature_packet(&MetricField::round_sphere(1.0), &[0.3, 0.1, -0.2]).unwrap();
        assert!((s.scalar - 6.0).abs() < 1e-14);
        assert!(s.traceless_norm_sq < 1e-24);
        for i in 0..3 {
            assert!((s.ricci[i][i] - 2.0).abs() < 1e-13);
        }
        let h = curvature_packet(&MetricField::hyperbolic(1.0), &[0.3, 0.1, -0.2]).unwrap();
        assert_eq!(h.scalar_laplacian, 0.0);
        let sw = curvature_packet(&MetricField::schwarzschild(1.0), &[0.0, 4.0, 0.0]).unwrap();
        assert!(sw.scalar.abs() < 1e-8);
        // |S|² = 6 m² / r⁶ from the radial/tangential Ricci eigenvalues (−2, 1, 1) m/r³.
        let oracle = 6.0 / 4f64.powi(6);
        assert!((sw.traceless_norm_sq - oracle).abs() < 1e-12 * oracle.max(1.0));
        assert!((sw.traceless_norm_sq - sw.traceless_norm_identity()).abs() < 1e-15);
    }

    /// Scalar curvature of `e^{2φ}δ` in three dimensions: `−e^{−2φ}(4Δφ + 2|∇φ|²)`,
    /// evaluated with nested central differences of φ.
    fn conformal_scalar_fd(phi: &Polynomial, x: &[f64; 3]) -> f64 {
        let h = 1e-3;
        let f = |y: &[f64; 3]| phi.eval(y);
        let mut lap = 0.0;
        let mut grad2 = 0.0;
        for k in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            lap += (f(&xp) - 2.0 * f(x) + f(&xm)) / (h * h);
            let d = (f(&xp) - f(&xm)) / (2.0 * h);
            grad2 += d * d;
        }
        -(-2.0 * f(x)).exp() * (4.0 * lap + 2.0 * grad2)
    }

    /// `Δ_g F = e^{−2φ}(ΔF + ∇φ·∇F)` for the conformal metric, by nested
    /// central differences with one Richardson extrapolation.
    fn conformal_laplacian_oracle(phi: &Polynomial, x: &[f64; 3]) -> f64 {
        let at = |h: f64| {
            let sc = |y: &[f64; 3]| conformal_scalar_fd(phi, y);
            let mut lap = 0.0;
            let mut dot_grad = 0.0;
            for k in 0..3 {
                let mut xp = *x;
                let mut xm = *x;
                xp[k] += h;
                xm[k] -= h;
                lap += (sc(&xp) - 2.0 * sc(x) + sc(&xm)) / (h * h);
                let ds = (sc(&xp) - sc(&xm)) / (2.0 * h);
                let dp = (phi.eval(&xp) - phi.eval(&xm)) / (2.0 * h);
                dot_grad += ds * dp;
            }
            (-2.0 * phi.eval(x)).exp() * (lap + dot_grad)
        };
        let (a, b) = (at(0.04), at(0.02));
        b + (b - a) / 3.0
    }

    #[test]
    fn conformal_scalar_laplacian_matches_oracle() {
        let phi = Polynomial::monomial(0.05, [2, 0, 0]);
        let m = MetricField::conformal(phi.clone());
        for x in [[0.3, -0.2, 0.1], [1.0, 0.5, -0.7], [0.0, 0.0, 0.0]] {
            let sc = m.scalar_at(&x).unwrap();
            assert!((sc - conformal_scalar_fd(&phi, &x)).abs() < 1e-6);
            let lap = scalar_laplacian(&m, &x).unwrap();
            let oracle = conformal_laplacian_oracle(&phi, &x);
            assert!((lap - oracle).abs() < 1e-5, "{lap} vs {oracle}");
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        for (m, x) in fixtures() {
            let g = m.metric_at(&x).unwrap();
            let f = m.orthonormal_frame(&x).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    let e = bilinear(&g, &f[a], &f[b]);
                    assert!((e - if a == b { 1.0 } else { 0.0 }).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn invalid_metrics_rejected() {
        assert!(MetricField::new(MetricKind::Schwarzschild { mass: -1.0 }).is_err());
        let h = SymmetricPolynomial {
            xx: Polynomial::monomial(1.0, [5, 0, 0]),
            ..Default::default()
        };
        assert!(MetricField::new(MetricKind::PolynomialPerturbation { h }).is_err());
    }

    fn random_point(kind: usize, u: [f64; 3]) -> [f64; 3] {
        match kind {
            // hyperbolic: well inside the ball
            3 => [u[0] * 0.8, u[1] * 0.8, u[2] * 0.8],
            // schwarzschild: shell 2.5 < r < 9
            4 => {
                let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt().max(1e-3);
                let r = 2.5 + 6.5 * (u[0] * 0.5 + 0.5);
                [u[0] * r / n, u[1] * r / n, u[2] * r / n]
            }
            _ => u,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn contracted_bianchi(kind in 0usize..7, u in prop::array::uniform3(-1.0f64..1.0)) {
            let (m, _) = fixtures().swap_remove(kind);
            let x = random_point(kind, u);
            let div = ricci_divergence(&m, &x).unwrap();
            let p = curvature_packet(&m, &x).unwrap();
            for k in 0..3 {
                prop_assert!((div[k] - 0.5 * p.scalar_gradient[k]).abs() < 1e-6);
            }
        }

        #[test]
        fn riemann_symmetries(kind in 0usize..7, u in prop::array::uniform3(-1.0f64..1.0)) {
            let (m, _) = fixtures().swap_remove(kind);
            let x = random_point(kind, u);
            let rm = m.riemann_at(&x).unwrap();
            for a in 0..3 { for b in 0..3 { for c in 0..3 { for d in 0..3 {
                let v = rm[a][b][c][d];
                prop_assert!((v + rm[b][a][c][d]).abs() < 1e-8);
                prop_assert!((v + rm[a][b][d][c]).abs() < 1e-8);
                prop_assert!((v - rm[c][d][a][b]).abs() < 1e-8);
            }}}}
        }

        #[test]
        fn space_forms_have_constant_curvature(kind in 0usize..4, u in prop::array::uniform3(-1.0f64..1.0)) {
            let (m, _) = fixtures().swap_remove(kind);
            let x = random_point(kind, u);
            let k = m.constant_curvature().unwrap();
            let g = m.metric_at(&x).unwrap();
            let rm = m.riemann_at(&x).unwrap();
            for a in 0..3 { for b in 0..3 { for c in 0..3 { for d in 0..3 {
                let e = k * (g[a][c] * g[b][d] - g[a][d] * g[b][c]);
                prop_assert!((rm[a][b][c][d] - e).abs() < 1e-7);
            }}}}
            // sectional curvature of a random plane
            let (v, w) = ([1.0, u[0], 0.3], [u[1], -0.5, 1.0 + u[2]]);
            let mut num = 0.0;
            for a in 0..3 { for b in 0..3 { for c in 0..3 { for d in 0..3 {
                num += rm[a][b][c][d] * v[a] * w[b] * v[c] * w[d];
            }}}}
            let area = bilinear(&g, &v, &v) * bilinear(&g, &w, &w) - bilinear(&g, &v, &w).powi(2);
            prop_assert!((num / area - k).abs() < 1e-9);
        }

        #[test]
        fn packet_invariants(kind in 0usize..7, u in prop::array::uniform3(-1.0f64..1.0)) {
            let (m, _) = fixtures().swap_remove(kind);
            let x = random_point(kind, u);
            prop_assert!(is_positive_definite(&m.metric_at(&x).unwrap()));
            let p = curvature_packet(&m, &x).unwrap();
            let tr = p.ricci[0][0] + p.ricci[1][1] + p.ricci[2][2];
            prop_assert!((tr - p.scalar).abs() <= 1e-9 * p.scalar.abs().max(1e-3));
            let trs = p.traceless[0][0] + p.traceless[1][1] + p.traceless[2][2];
            prop_assert!(trs.abs() < 1e-9 * p.scalar.abs().max(1.0));
            let id = p.traceless_norm_identity();
            let scale = p.scalar * p.scalar / 3.0 + p.traceless_norm_sq;
            prop_assert!((id - p.traceless_norm_sq).abs() <= 1e-9 * scale.max(1e-6));
        }
    }
}
