//! Real spherical harmonics, the operator `Δ(Δ+2)` on S² and the optimal perturbation.
//!
//! Basis functions are real and orthonormal in `L²(S²)`, written as polynomials in
//! `Θ = (x, y, z)` without the Condon–Shortley phase:
//! `Y_{l,m} ∝ P_l^{(m)}(z) Re (x + iy)^m` for `m ≥ 0` and `Im (x + iy)^{|m|}` for `m < 0`.
//! Coefficients are stored at index `l² + l + m`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geodesics::{polar_direction, Perturbation};
use crate::linalg::*;
use crate::manifold::{CurvaturePacket, MetricField};
use crate::real::{jet2_variable, Real};
use crate::surface::{EmbeddedSurface, SphereGrid};

pub fn index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// `(l, m)` of coefficient index `k`.
pub fn degree_order(k: usize) -> (usize, i64) {
    let l = (k as f64).sqrt().floor() as usize;
    let l = if (l + 1) * (l + 1) <= k { l + 1 } else { l };
    (l, k as i64 - (l * l + l) as i64)
}

pub fn basis_len(max_degree: usize) -> usize {
    (max_degree + 1) * (max_degree + 1)
}

fn factorial_ratio(l: usize, m: usize) -> f64 {
    // (l − m)! / (l + m)!
    let mut r = 1.0;
    for k in (l - m + 1)..=(l + m) {
        r /= k as f64;
    }
    r
}

/// All real harmonics up to degree `max_degree` at the unit vector `t`.
pub fn eval_basis<T: Real>(max_degree: usize, t: &Vec3<T>) -> Vec<T> {
    let n = basis_len(max_degree);
    let mut out = vec![T::zero(); n];
    let (x, y, z) = (t[0], t[1], t[2]);
    // Re/Im of (x + iy)^m
    let mut re = T::cst(1.0);
    let mut im = T::zero();
    let mut qmm = 1.0;
    for m in 0..=max_degree {
        if m > 0 {
            let nre = re * x - im * y;
            im = re * y + im * x;
            re = nre;
            qmm *= (2 * m - 1) as f64;
        }
        // Q_l^m = d^m P_l / dz^m by upward recurrence in l
        let mut q_prev = T::zero();
        let mut q = T::cst(qmm);
        for l in m..=max_degree {
            if l > m {
                let next = (z * q * (2 * l - 1) as f64 - q_prev * (l + m - 1) as f64) / (l - m) as f64;
                q_prev = q;
                q = next;
            }
            let mut norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial_ratio(l, m)).sqrt();
            if m == 0 {
                out[l * l + l] = q * norm;
            } else {
                norm *= std::f64::consts::SQRT_2;
                out[l * l + l + m] = q * re * norm;
                out[l * l + l - m] = q * im * norm;
            }
        }
    }
    out
}

/// Coefficients `c_{lm}` of a band-limited function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicField {
    pub max_degree: usize,
    pub coeffs: Vec<f64>,
}

impl HarmonicField {
    pub fn zeros(max_degree: usize) -> Self {
        Self {
            max_degree,
            coeffs: vec![0.0; basis_len(max_degree)],
        }
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        if l > self.max_degree {
            return 0.0;
        }
        self.coeffs[index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        self.coeffs[index(l, m)] = v;
    }

    /// Coefficients of `Θᵀ A Θ + c` (degrees 0 and 2 only).
    pub fn from_quadratic(a: &Mat3<f64>, c: f64, max_degree: usize) -> Self {
        let mut f = Self::zeros(max_degree.max(2));
        let s = (4.0 * PI / 15.0).sqrt();
        let tr = a[0][0] + a[1][1] + a[2][2];
        f.set(0, 0, (4.0 * PI).sqrt() * (tr / 3.0 + c));
        f.set(2, -2, 2.0 * s * a[0][1]);
        f.set(2, -1, 2.0 * s * a[1][2]);
        f.set(2, 0, (20.0 * PI).sqrt() / 15.0 * (2.0 * a[2][2] - a[0][0] - a[1][1]));
        f.set(2, 1, 2.0 * s * a[0][2]);
        f.set(2, 2, s * (a[0][0] - a[1][1]));
        f
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            max_degree: self.max_degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Coefficients of degree `l`, ordered `m = −l..=l`.
    pub fn degree(&self, l: usize) -> &[f64] {
        &self.coeffs[l * l..(l + 1) * (l + 1)]
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Removes the kernel `l ∈ {0, 1}` of `Δ(Δ+2)`.
    pub fn kernel_projection(&self) -> Self {
        let mut f = self.clone();
        for c in f.coeffs.iter_mut().take(4) {
            *c = 0.0;
        }
        f
    }

    pub fn sub(&self, other: &Self) -> Self {
        let l = self.max_degree.max(other.max_degree);
        let mut f = Self::zeros(l);
        for (k, c) in f.coeffs.iter_mut().enumerate() {
            *c = self.coeffs.get(k).copied().unwrap_or(0.0) - other.coeffs.get(k).copied().unwrap_or(0.0);
        }
        f
    }
}

impl Perturbation for HarmonicField {
    fn value<T: Real>(&self, theta: &Vec3<T>) -> T {
        let y = eval_basis(self.max_degree, theta);
        let mut v = T::zero();
        for (c, b) in self.coeffs.iter().zip(y) {
            if *c != 0.0 {
                v += b * *c;
            }
        }
        v
    }
}

/// Eigenvalue of `Δ(Δ+2)` on degree `l`.
pub fn bilaplacian_shifted_eigenvalue(l: usize) -> f64 {
    let e = -((l * (l + 1)) as f64);
    e * (e + 2.0)
}

pub fn apply_bilaplacian_shifted(f: &HarmonicField) -> HarmonicField {
    let mut out = f.clone();
    for (k, c) in out.coeffs.iter_mut().enumerate() {
        *c *= bilaplacian_shifted_eigenvalue(degree_order(k).0);
    }
    out
}

pub fn apply_laplacian(f: &HarmonicField) -> HarmonicField {
    let mut out = f.clone();
    for (k, c) in out.coeffs.iter_mut().enumerate() {
        let l = degree_order(k).0;
        *c *= -((l * (l + 1)) as f64);
    }
    out
}

/// `w ⊥ Ker` with `Δ(Δ+2) w = P rhs`.
pub fn solve_constrained(rhs: &HarmonicField) -> HarmonicField {
    let mut out = rhs.kernel_projection();
    for (k, c) in out.coeffs.iter_mut().enumerate().skip(4) {
        *c /= bilaplacian_shifted_eigenvalue(degree_order(k).0);
    }
    out
}

/// Basis values tabulated on a grid.
#[derive(Clone, Debug)]
pub struct SphericalBasis {
    pub max_degree: usize,
    pub grid: SphereGrid,
    /// `values[node][k]`.
    values: Vec<Vec<f64>>,
}

impl SphericalBasis {
    pub fn new(grid: &SphereGrid, max_degree: usize) -> Result<Self> {
        if max_degree + 2 > grid.n_theta || 2 * max_degree >= grid.n_phi {
            return Err(LabError::BandLimitExceeded {
                degree: max_degree,
                n_theta: grid.n_theta,
                n_phi: grid.n_phi,
            });
        }
        let values = grid
            .nodes
            .par_iter()
            .map(|n| eval_basis(max_degree, &n.dir))
            .collect();
        Ok(Self {
            max_degree,
            grid: grid.clone(),
            values,
        })
    }

    /// Quadrature projection onto the basis.
    pub fn analyze(&self, values: &[f64]) -> Result<HarmonicField> {
        if values.len() != self.grid.len() {
            return Err(LabError::Config(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                self.grid.len()
            )));
        }
        let mut f = HarmonicField::zeros(self.max_degree);
        for (n, v) in values.iter().enumerate() {
            let wv = self.grid.weights[n] * v;
            for (c, y) in f.coeffs.iter_mut().zip(&self.values[n]) {
                *c += wv * y;
            }
        }
        Ok(f)
    }

    pub fn synthesize(&self, f: &HarmonicField) -> Vec<f64> {
        self.values
            .iter()
            .map(|ys| f.coeffs.iter().zip(ys).map(|(c, y)| c * y).sum())
            .collect()
    }

    pub fn analyze_fn(&self, f: impl Fn(&[f64; 3]) -> f64) -> HarmonicField {
        let v: Vec<f64> = self.grid.nodes.iter().map(|n| f(&n.dir)).collect();
        self.analyze(&v).expect("grid-sized input")
    }
}

/// `wbar = −Ric(Θ,Θ)/6 + Sc/18` with multiplier `λ = (2/3) Sc`.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalPerturbation {
    pub wbar: HarmonicField,
    pub lambda: f64,
    pub rho: f64,
}

impl OptimalPerturbation {
    /// `w_{p,ρ} = ρ² wbar`.
    pub fn w_of_rho(&self) -> HarmonicField {
        self.wbar.scaled(self.rho * self.rho)
    }
}

pub fn optimal_perturbation(cp: &CurvaturePacket, rho: f64) -> Result<OptimalPerturbation> {
    if !(rho > 0.0) {
        return Err(LabError::Config(format!("radius must be positive, got {rho}")));
    }
    let a = cp.ricci.map(|row| row.map(|v| -v / 6.0));
    Ok(OptimalPerturbation {
        wbar: HarmonicField::from_quadratic(&a, cp.scalar / 18.0, 2),
        lambda: 2.0 / 3.0 * cp.scalar,
        rho,
    })
}

/// `‖Δ(Δ+2) wbar − [(1/3)Δ Ric(Θ,Θ) − 2 Ric(Θ,Θ) + λ]‖` in coefficient space.
///
/// The bracket is tabulated pointwise using `Δ_{S²}(Θᵀ A Θ) = 2 tr A − 6 Θᵀ A Θ`.
pub fn pde_residual(cp: &CurvaturePacket, wbar: &HarmonicField, basis: &SphericalBasis) -> Result<f64> {
    let lambda = 2.0 / 3.0 * cp.scalar;
    let tr = cp.ricci[0][0] + cp.ricci[1][1] + cp.ricci[2][2];
    let rhs: Vec<f64> = basis
        .grid
        .nodes
        .iter()
        .map(|n| {
            let q = bilinear(&cp.ricci, &n.dir, &n.dir);
            (2.0 * tr - 6.0 * q) / 3.0 - 2.0 * q + lambda
        })
        .collect();
    let rhs = basis.analyze(&rhs)?;
    Ok(apply_bilaplacian_shifted(wbar).sub(&rhs).l2_norm())
}

/// Coefficients of `H` and its angular derivatives from a spectral fit.
fn mean_curvature_jets(surface: &EmbeddedSurface) -> Result<Vec<([f64; 2], [[f64; 2]; 2])>> {
    let grid = &surface.grid;
    let basis = SphericalBasis::new(grid, grid.n_theta - 2)?;
    let h = basis.analyze(&surface.mean_curvature)?;
    Ok(grid
        .nodes
        .par_iter()
        .map(|n| {
            let t = polar_direction(jet2_variable(n.theta1, 0), jet2_variable(n.theta2, 1));
            let j = h.value(&t);
            (
                [j.v.d[0], j.v.d[1]],
                [[j.d[0].d[0], j.d[0].d[1]], [j.d[1].d[0], j.d[1].d[1]]],
            )
        })
        .collect())
}

/// `2Δ_Σ H + H(H² − 4D + 2Ric(N,N)) − λH` per node.
///
/// `Δ_Σ H = ĝ^{ij}(∂_i∂_j H − Γ̂^k_ij ∂_k H)` with the angular derivatives of `H`
/// taken from its harmonic expansion on the grid.
pub fn willmore_el_residual(surface: &EmbeddedSurface, metric: &MetricField, lambda: f64) -> Result<Vec<f64>> {
    let (dh, terms) = el_parts(surface, metric)?;
    Ok(dh
        .iter()
        .zip(&terms)
        .zip(&surface.mean_curvature)
        .map(|((a, b), h)| a + b - lambda * h)
        .collect())
}

fn el_parts(surface: &EmbeddedSurface, metric: &MetricField) -> Result<(Vec<f64>, Vec<f64>)> {
    let jets = mean_curvature_jets(surface)?;
    let n = surface.grid.len();
    let mut lap = Vec::with_capacity(n);
    let mut rest = Vec::with_capacity(n);
    for k in 0..n {
        let g = &surface.first_form[k];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        let (d1, d2) = &jets[k];
        let chr = &surface.surface_christoffel[k];
        let mut l = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                l += gi[i][j] * (d2[i][j] - chr[0][i][j] * d1[0] - chr[1][i][j] * d1[1]);
            }
        }
        let h = surface.mean_curvature[k];
        let ric = metric.ricci_t(&surface.positions[k]);
        let nn = bilinear(&ric, &surface.normal[k], &surface.normal[k]);
        lap.push(2.0 * l);
        rest.push(h * (h * h - 4.0 * surface.gauss_product[k] + 2.0 * nn));
    }
    Ok((lap, rest))
}

/// Multiplier minimising the quadrature `L²` norm of the residual.
pub fn least_squares_lambda(surface: &EmbeddedSurface, metric: &MetricField) -> Result<f64> {
    let (a, b) = el_parts(surface, metric)?;
    let grid = &surface.grid;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..grid.len() {
        let h = surface.mean_curvature[k];
        num += grid.weights[k] * h * (a[k] + b[k]);
        den += grid.weights[k] * h * h;
    }
    Ok(num / den)
}

/// Writes `l,m,value`.
pub fn write_coefficients_csv<W: Write>(f: &HarmonicField, mut out: W) -> Result<()> {
    writeln!(out, "l,m,value")?;
    for (k, c) in f.coeffs.iter().enumerate() {
        let (l, m) = degree_order(k);
        writeln!(out, "{l},{m},{c:.16e}")?;
    }
    Ok(())
}
