//! Quadrature on S², extrinsic geometry of embedded spheres and Hawking masses.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geodesics::{
    polar_direction, sample_embedding, surface_tangents, EmbeddingSample, GeodesicConfig,
    JetOrder, Perturbation, PerturbedSphere,
};
use crate::linalg::*;
use crate::manifold::{curvature_packet, MetricField};
use crate::real::{jet2_variable, Jet1, Jet2, Real};

#[derive(Clone, Debug)]
pub struct GridNode {
    pub theta1: f64,
    pub theta2: f64,
    /// `Θ`.
    pub dir: [f64; 3],
    /// `Θ₁ = ∂Θ/∂θ¹`.
    pub d1: [f64; 3],
    /// `Θ₂ = ∂Θ/∂θ²`.
    pub d2: [f64; 3],
}

/// Gauss–Legendre in `cos θ¹` times a uniform periodic rule in `θ²`.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Polar nodes, increasing.
    pub theta: Vec<f64>,
    pub gl_weights: Vec<f64>,
    /// Node `i * n_phi + j` holds `(theta[i], 2πj/n_phi)`.
    pub nodes: Vec<GridNode>,
    /// Surface-measure weights on the unit sphere, summing to 4π.
    pub weights: Vec<f64>,
    /// `(row, shifted by π, weight)` for the polar derivative at each row.
    theta_stencil: Vec<[(usize, bool, f64); 5]>,
}

/// Legendre nodes and weights on `[-1, 1]`, nodes decreasing.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n {
        let mut z = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for l in 2..=n {
                let p2 = ((2 * l - 1) as f64 * z * p1 - (l - 1) as f64 * p0) / l as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[k] = z;
        w[k] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Finite-difference weights for derivative orders `0..=m` at `x0`.
pub fn fornberg(x0: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

pub fn build_grid(n_theta: usize, n_phi: usize) -> Result<SphereGrid> {
    let coarse = |reason: &str| LabError::GridTooCoarse {
        n_theta,
        n_phi,
        reason: reason.into(),
    };
    if n_theta < 8 {
        return Err(coarse("n_theta must be at least 8"));
    }
    if n_phi < 16 {
        return Err(coarse("n_phi must be at least 16"));
    }
    if !n_phi.is_multiple_of(2) {
        return Err(coarse("n_phi must be even"));
    }
    let (z, glw) = gauss_legendre(n_theta);
    let theta: Vec<f64> = z.iter().map(|z| z.acos()).collect();
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        for j in 0..n_phi {
            let t1 = theta[i];
            let t2 = j as f64 * dphi;
            let (s1, c1, s2, c2) = (t1.sin(), t1.cos(), t2.sin(), t2.cos());
            nodes.push(GridNode {
                theta1: t1,
                theta2: t2,
                dir: [s1 * c2, s1 * s2, c1],
                d1: [c1 * c2, c1 * s2, -s1],
                d2: [-s1 * s2, s1 * c2, 0.0],
            });
            weights.push(glw[i] * dphi);
        }
    }
    // Rows beyond the poles are reflections: (−θ, φ) and (2π − θ, φ) are the
    // nodes (θ, φ + π).
    let nt = n_theta as isize;
    let theta_stencil = (0..nt)
        .map(|i| {
            let mut pts = [0.0; 5];
            let mut refs = [(0usize, false, 0.0); 5];
            for (s, off) in (-2isize..=2).enumerate() {
                let r = i + off;
                let (row, shifted, t) = if r < 0 {
                    let k = (-1 - r) as usize;
                    (k, true, -theta[k])
                } else if r >= nt {
                    let k = (2 * nt - 1 - r) as usize;
                    (k, true, 2.0 * PI - theta[k])
                } else {
                    (r as usize, false, theta[r as usize])
                };
                pts[s] = t;
                refs[s] = (row, shifted, 0.0);
            }
            let c = fornberg(theta[i as usize], &pts, 1);
            for s in 0..5 {
                refs[s].2 = c[1][s];
            }
            refs
        })
        .collect();
    Ok(SphereGrid {
        n_theta,
        n_phi,
        theta,
        gl_weights: glw,
        nodes,
        weights,
        theta_stencil,
    })
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weight for integrands given per unit of `dθ¹ dθ²`.
    pub fn coordinate_weight(&self, n: usize) -> f64 {
        self.weights[n] / self.nodes[n].theta1.sin()
    }

    /// `Σ weights · f`, summed in node order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_fn(&self, f: impl Fn(&GridNode) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| w * f(n))
            .sum()
    }

    pub(crate) fn require_fd(&self) -> Result<()> {
        if self.n_theta < 8 || self.n_phi < 16 {
            return Err(LabError::GridTooCoarse {
                n_theta: self.n_theta,
                n_phi: self.n_phi,
                reason: "finite differences need at least 8x16 nodes".into(),
            });
        }
        Ok(())
    }

    /// Fourth-order `∂/∂θ¹` of a vector field given per node.
    pub fn fd_theta<const D: usize>(&self, f: &[[f64; D]]) -> Vec<[f64; D]> {
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut out = vec![[0.0; D]; nt * np];
        for i in 0..nt {
            for j in 0..np {
                let o = &mut out[i * np + j];
                for &(row, shifted, w) in &self.theta_stencil[i] {
                    let col = if shifted { (j + np / 2) % np } else { j };
                    let v = &f[row * np + col];
                    for k in 0..D {
                        o[k] += w * v[k];
                    }
                }
            }
        }
        out
    }

    /// Fourth-order periodic `∂/∂θ²`.
    pub fn fd_phi<const D: usize>(&self, f: &[[f64; D]]) -> Vec<[f64; D]> {
        let (nt, np) = (self.n_theta, self.n_phi);
        let h = 2.0 * PI / np as f64;
        let mut out = vec![[0.0; D]; nt * np];
        for i in 0..nt {
            for j in 0..np {
                let at = |s: isize| &f[i * np + ((j as isize + s).rem_euclid(np as isize) as usize)];
                let (p1, p2, m1, m2) = (at(1), at(2), at(-1), at(-2));
                for k in 0..D {
                    out[i * np + j][k] = (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h);
                }
            }
        }
        out
    }
}

/// Discretised embedded sphere with its extrinsic geometry.
#[derive(Clone, Debug)]
pub struct EmbeddedSurface {
    pub grid: SphereGrid,
    pub positions: Vec<[f64; 3]>,
    pub tangents: Vec<[[f64; 3]; 2]>,
    /// Inward unit normal.
    pub normal: Vec<[f64; 3]>,
    pub first_form: Vec<[[f64; 2]; 2]>,
    pub second_form: Vec<[[f64; 2]; 2]>,
    pub mean_curvature: Vec<f64>,
    pub gauss_product: Vec<f64>,
    /// `√det ĝ` per unit `dθ¹ dθ²`.
    pub area_element: Vec<f64>,
    /// `Γ̂^k_ij` of the induced metric, as `[k][i][j]`.
    pub surface_christoffel: Vec<[[[f64; 2]; 2]; 2]>,
    pub max_energy_drift: f64,
}

fn inv2(m: &[[f64; 2]; 2]) -> ([[f64; 2]; 2], f64) {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    (
        [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]],
        det,
    )
}

struct NodeGeometry {
    normal: [f64; 3],
    first: [[f64; 2]; 2],
    second: [[f64; 2]; 2],
    mean: f64,
    gauss: f64,
    area: f64,
    christoffel: [[[f64; 2]; 2]; 2],
}

fn first_form(g: &Mat3<f64>, z: &[[f64; 3]; 2]) -> [[f64; 2]; 2] {
    let mut gh = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            gh[i][j] = bilinear(g, &z[i], &z[j]);
        }
    }
    gh
}

/// Inward unit normal from `g(N, Z_i) = 0`, `g(N, N) = 1`, returned with the
/// normalised covector `n / |n|_g`.
fn unit_normal(
    metric: &MetricField,
    x: &[f64; 3],
    z: &[[f64; 3]; 2],
    outward: &[f64; 3],
) -> ([f64; 3], [f64; 3]) {
    let gi = metric.inverse_metric_t(x);
    let n = cross(&z[0], &z[1]);
    let norm = bilinear(&gi, &n, &n).sqrt();
    let sign = if dot(&n, outward) > 0.0 { -1.0 } else { 1.0 };
    let cov = [sign * n[0] / norm, sign * n[1] / norm, sign * n[2] / norm];
    (mat_vec(&gi, &cov), cov)
}

fn finish(
    first: [[f64; 2]; 2],
    second: [[f64; 2]; 2],
    christoffel: [[[f64; 2]; 2]; 2],
    normal: [f64; 3],
    node: usize,
) -> Result<NodeGeometry> {
    let (ginv, det) = inv2(&first);
    if !(det > 0.0) {
        return Err(LabError::DegenerateSurface { node, det });
    }
    let mut mean = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            mean += ginv[i][j] * second[i][j];
        }
    }
    let gauss = (second[0][0] * second[1][1] - second[0][1] * second[1][0]) / det;
    Ok(NodeGeometry {
        normal,
        first,
        second,
        mean,
        gauss,
        area: det.sqrt(),
        christoffel,
    })
}

fn assemble(
    grid: &SphereGrid,
    sample: &EmbeddingSample,
    tangents: Vec<[[f64; 3]; 2]>,
    nodes: Vec<Result<NodeGeometry>>,
) -> Result<EmbeddedSurface> {
    let n = grid.len();
    let mut s = EmbeddedSurface {
        grid: grid.clone(),
        positions: sample.positions.clone(),
        tangents,
        normal: Vec::with_capacity(n),
        first_form: Vec::with_capacity(n),
        second_form: Vec::with_capacity(n),
        mean_curvature: Vec::with_capacity(n),
        gauss_product: Vec::with_capacity(n),
        area_element: Vec::with_capacity(n),
        surface_christoffel: Vec::with_capacity(n),
        max_energy_drift: sample.max_energy_drift,
    };
    for node in nodes {
        let g = node?;
        s.normal.push(g.normal);
        s.first_form.push(g.first);
        s.second_form.push(g.second);
        s.mean_curvature.push(g.mean);
        s.gauss_product.push(g.gauss);
        s.area_element.push(g.area);
        s.surface_christoffel.push(g.christoffel);
    }
    Ok(s)
}

/// Fundamental forms, normal, mean curvature and area element.
///
/// When the sample carries second derivatives, `∇_{Z_i} Z_j = ∂_i∂_j X + Γ(Z_i, Z_j)`
/// gives `h_ij = g(∇_{Z_i} Z_j, N)` directly. Otherwise tangents (when absent) and
/// `∂_i N` come from grid finite differences and `h_ij = −g(∇_{Z_i} N, Z_j)`.
pub fn extrinsic_geometry(
    metric: &MetricField,
    sample: &EmbeddingSample,
    grid: &SphereGrid,
) -> Result<EmbeddedSurface> {
    if sample.positions.len() != grid.len() {
        return Err(LabError::Config("sample does not match grid".into()));
    }
    for x in &sample.positions {
        metric.check_domain(x)?;
    }
    if !sample.second.is_empty() {
        let nodes: Vec<Result<NodeGeometry>> = (0..grid.len())
            .into_par_iter()
            .map(|n| {
                let x = &sample.positions[n];
                let z = &sample.tangents[n];
                let g = metric.metric_t(x);
                let (normal, cov) = unit_normal(metric, x, z, &sample.outward[n]);
                let first = first_form(&g, z);
                let mut nab = [[[0.0; 3]; 2]; 2];
                for i in 0..2 {
                    for j in i..2 {
                        let c = metric.connection(x, &z[i], &z[j]);
                        for k in 0..3 {
                            nab[i][j][k] = sample.second[n][i][j][k] + c[k];
                        }
                        nab[j][i] = nab[i][j];
                    }
                }
                let mut second = [[0.0; 2]; 2];
                let mut proj = [[[0.0; 2]; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        second[i][j] = dot(&cov, &nab[i][j]);
                        for l in 0..2 {
                            proj[i][j][l] = bilinear(&g, &nab[i][j], &z[l]);
                        }
                    }
                }
                let (ginv, _) = inv2(&first);
                let mut chr = [[[0.0; 2]; 2]; 2];
                for k in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            chr[k][i][j] = ginv[k][0] * proj[i][j][0] + ginv[k][1] * proj[i][j][1];
                        }
                    }
                }
                finish(first, second, chr, normal, n)
            })
            .collect();
        return assemble(grid, sample, sample.tangents.clone(), nodes);
    }

    let tangents = if sample.tangents.is_empty() {
        surface_tangents(&sample.positions, grid)?
    } else {
        grid.require_fd()?;
        sample.tangents.clone()
    };
    let normals: Vec<[f64; 3]> = (0..grid.len())
        .map(|n| unit_normal(metric, &sample.positions[n], &tangents[n], &sample.outward[n]).0)
        .collect();
    let dn = [grid.fd_theta(&normals), grid.fd_phi(&normals)];
    let firsts: Vec<[f64; 4]> = (0..grid.len())
        .map(|n| {
            let f = first_form(&metric.metric_t(&sample.positions[n]), &tangents[n]);
            [f[0][0], f[0][1], f[1][0], f[1][1]]
        })
        .collect();
    let dfirst = [grid.fd_theta(&firsts), grid.fd_phi(&firsts)];
    let nodes: Vec<Result<NodeGeometry>> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let x = &sample.positions[n];
            let z = &tangents[n];
            let g = metric.metric_t(x);
            let first = first_form(&g, z);
            let mut second = [[0.0; 2]; 2];
            let mut raw = [[0.0; 2]; 2];
            for i in 0..2 {
                let c = metric.connection(x, &z[i], &normals[n]);
                let mut nab = dn[i][n];
                for k in 0..3 {
                    nab[k] += c[k];
                }
                for j in 0..2 {
                    raw[i][j] = -bilinear(&g, &nab, &z[j]);
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    second[i][j] = 0.5 * (raw[i][j] + raw[j][i]);
                }
            }
            let (ginv, _) = inv2(&first);
            let d = |k: usize, i: usize, j: usize| dfirst[k][n][2 * i + j];
            let mut chr = [[[0.0; 2]; 2]; 2];
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        for l in 0..2 {
                            chr[k][i][j] +=
                                0.5 * ginv[k][l] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                        }
                    }
                }
            }
            finish(first, second, chr, normals[n], n)
        })
        .collect();
    assemble(grid, sample, tangents, nodes)
}

/// Builds the surface `Exp_p[ρ(1 − w)Θ]` with exact angular jets.
pub fn perturbed_sphere_surface<P: Perturbation>(
    metric: &MetricField,
    p: &[f64; 3],
    rho: f64,
    w: &P,
    grid: &SphereGrid,
    cfg: &GeodesicConfig,
) -> Result<EmbeddedSurface> {
    metric.check_domain(p)?;
    let emb = PerturbedSphere::new(metric, p, rho, w, cfg)?;
    let sample = sample_embedding(&emb, grid, JetOrder::Second)?;
    extrinsic_geometry(metric, &sample, grid)
}

/// Area of `Exp_p[ρ(1 − w)Θ]` from first-order jets only.
pub fn perturbed_sphere_area<P: Perturbation>(
    metric: &MetricField,
    frame: &Mat3<f64>,
    p: &[f64; 3],
    rho: f64,
    w: &P,
    grid: &SphereGrid,
    cfg: &GeodesicConfig,
) -> Result<f64> {
    let emb = PerturbedSphere::with_frame(metric, p, *frame, rho, w, cfg);
    let s = sample_embedding(&emb, grid, JetOrder::First)?;
    let mut area = 0.0;
    for n in 0..grid.len() {
        let f = first_form(&metric.metric_t(&s.positions[n]), &s.tangents[n]);
        let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
        if !(det > 0.0) {
            return Err(LabError::DegenerateSurface { node: n, det });
        }
        area += grid.coordinate_weight(n) * det.sqrt();
    }
    Ok(area)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HawkingReport {
    pub area: f64,
    pub willmore: f64,
    /// `16π − W`, summed node by node to avoid cancellation.
    pub deficit: f64,
    pub hawking: f64,
    pub cosmological_sign: i32,
    pub generalized: f64,
}

impl HawkingReport {
    /// The mass selected by the sign: plain for `K = 0`, generalized otherwise.
    pub fn mass(&self) -> f64 {
        if self.cosmological_sign == 0 {
            self.hawking
        } else {
            self.generalized
        }
    }
}

pub fn hawking_mass(surface: &EmbeddedSurface, k: i32) -> Result<HawkingReport> {
    if !(-1..=1).contains(&k) {
        return Err(LabError::Config(format!("cosmological sign {k} not in {{-1, 0, 1}}")));
    }
    let grid = &surface.grid;
    let mut area = 0.0;
    let mut willmore = 0.0;
    let mut deficit = 16.0 * PI - 4.0 * grid.weights.iter().sum::<f64>();
    for n in 0..grid.len() {
        let w = grid.coordinate_weight(n);
        let h = surface.mean_curvature[n];
        let da = surface.area_element[n];
        area += w * da;
        willmore += w * h * h * da;
        deficit -= w * (h * h * da - 4.0 * grid.nodes[n].theta1.sin());
    }
    let pref = (area / (16.0 * PI).powi(3)).sqrt();
    Ok(HawkingReport {
        area,
        willmore,
        deficit,
        hawking: pref * deficit,
        cosmological_sign: k,
        generalized: pref * (deficit - 4.0 * k as f64 * area),
    })
}

/// Writes `theta1,theta2,x,y,z,H,dA`.
pub fn write_surface_csv<W: Write>(surface: &EmbeddedSurface, mut out: W) -> Result<()> {
    writeln!(out, "theta1,theta2,x,y,z,H,dA")?;
    for n in 0..surface.grid.len() {
        let node = &surface.grid.nodes[n];
        let x = &surface.positions[n];
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            node.theta1, node.theta2, x[0], x[1], x[2], surface.mean_curvature[n],
            surface.area_element[n] * surface.grid.coordinate_weight(n)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderCheck {
    pub radii: Vec<f64>,
    /// Sup over nodes of `|h_ij − truncation|`.
    pub residuals: Vec<f64>,
    pub order: f64,
    pub r_squared: f64,
    pub mean_curvature_residuals: Vec<f64>,
    pub mean_curvature_order: f64,
}

/// Slope and `R²` of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Curvature part of the `h_ij` and `H` expansions through `ρ³` (resp. `ρ`),
/// at one node with perturbation jets `w, w_k` and `Hess w`.
struct CurvatureTerms {
    h: [[f64; 2]; 2],
    mean: f64,
}

fn curvature_terms(
    rm: &Tensor4<f64>,
    ric: &Mat3<f64>,
    theta1: f64,
    theta2: f64,
    w: &Jet2,
    rho: f64,
) -> CurvatureTerms {
    let th = polar_direction(jet2_variable(theta1, 0), jet2_variable(theta2, 1));
    // Θ and Θ_i as first-order jets in the angles
    let t: [Jet1; 3] = [th[0].v, th[1].v, th[2].v];
    let ti: [[Jet1; 3]; 2] = [
        [th[0].d[0], th[1].d[0], th[2].d[0]],
        [th[0].d[1], th[1].d[1], th[2].d[1]],
    ];
    // T_ij = g(R(Θ,Θ_i)Θ,Θ_j) = Rm(Θ_j, Θ, Θ, Θ_i)
    let mut tij = [[Jet1::cst(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Jet1::cst(0.0);
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        for d in 0..3 {
                            let r = rm[a][b][c][d];
                            if r != 0.0 {
                                acc += ti[j][a] * t[b] * t[c] * ti[i][d] * r;
                            }
                        }
                    }
                }
            }
            tij[i][j] = acc;
        }
    }
    let (s, c) = (theta1.sin(), theta1.cos());
    let gs_inv = [[1.0, 0.0], [0.0, 1.0 / (s * s)]];
    // ∂_l g^S_ij: only ∂_1 g_22 = 2 sin cos
    let dgs = |l: usize, i: usize, j: usize| {
        if l == 0 && i == 1 && j == 1 {
            2.0 * s * c
        } else {
            0.0
        }
    };
    let wv = w.v.v;
    let wk = [w.v.d[0], w.v.d[1]];
    // S² Hessian of w
    let mut hess = [[0.0; 2]; 2];
    let chr_s = |k: usize, i: usize, j: usize| match (k, i, j) {
        (0, 1, 1) => -s * c,
        (1, 0, 1) | (1, 1, 0) => c / s,
        _ => 0.0,
    };
    for i in 0..2 {
        for j in 0..2 {
            hess[i][j] = w.d[i].d[j] - chr_s(0, i, j) * wk[0] - chr_s(1, i, j) * wk[1];
        }
    }
    let r3 = rho.powi(3);
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut v = (2.0 / 3.0) * tij[i][j].v * (1.0 - wv).powi(3);
            for k in 0..2 {
                for nn in 0..2 {
                    for m in 0..2 {
                        for l in 0..2 {
                            v += (1.0 / 6.0)
                                * wk[k]
                                * gs_inv[k][nn]
                                * gs_inv[m][l]
                                * tij[nn][m].v
                                * (dgs(i, j, l) + dgs(j, i, l) - dgs(l, i, j));
                        }
                    }
                }
                for l in 0..2 {
                    v -= (1.0 / 6.0)
                        * wk[k]
                        * gs_inv[k][l]
                        * (tij[j][l].d[i] + tij[i][l].d[j] - tij[i][j].d[l]);
                }
            }
            h[i][j] = v * r3;
        }
    }
    // mean curvature, ρ¹ terms
    let mut mean = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for nn in 0..2 {
                    for m in 0..2 {
                        for l in 0..2 {
                            mean += (1.0 / 6.0)
                                * wk[k]
                                * gs_inv[i][j]
                                * gs_inv[k][nn]
                                * gs_inv[m][l]
                                * tij[nn][m].v
                                * (dgs(i, j, l) + dgs(j, i, l) - dgs(l, i, j));
                        }
                    }
                }
                for l in 0..2 {
                    mean -= (1.0 / 6.0)
                        * wk[k]
                        * gs_inv[i][j]
                        * gs_inv[k][l]
                        * (tij[j][l].d[i] + tij[i][l].d[j] - tij[i][j].d[l]);
                }
            }
            for l in 0..2 {
                for k in 0..2 {
                    mean -= (1.0 / 3.0) * gs_inv[i][l] * gs_inv[k][j] * tij[l][k].v * hess[i][j];
                }
            }
        }
    }
    let dir = [t[0].v, t[1].v, t[2].v];
    mean -= (1.0 / 3.0) * bilinear(ric, &dir, &dir) * (1.0 - wv);
    CurvatureTerms {
        h,
        mean: mean * rho,
    }
}

/// Measures the decay order of `h_ij` minus its expansion through `ρ³`.
///
/// The flat part of the expansion is taken from the same construction in
/// Euclidean space (exact in `w`), so the residual isolates the curvature terms.
pub fn expansion_order_check<P: Perturbation>(
    metric: &MetricField,
    p: &[f64; 3],
    w: &P,
    radii: &[f64],
    grid: &SphereGrid,
    cfg: &GeodesicConfig,
) -> Result<OrderCheck> {
    if radii.len() < 5 {
        return Err(LabError::FitUnstable("order check needs at least 5 radii".into()));
    }
    let cp = curvature_packet(metric, p)?;
    let flat = MetricField::euclidean();
    let mut residuals = Vec::new();
    let mut mean_res = Vec::new();
    for &rho in radii {
        let curved = perturbed_sphere_surface(metric, p, rho, w, grid, cfg)?;
        let euclid = perturbed_sphere_surface(&flat, &[0.0; 3], rho, w, grid, cfg)?;
        let per_node: Vec<(f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|n| {
                let node = &grid.nodes[n];
                let th = polar_direction(jet2_variable(node.theta1, 0), jet2_variable(node.theta2, 1));
                let wj = w.value(&th);
                let terms = curvature_terms(&cp.riemann, &cp.ricci, node.theta1, node.theta2, &wj, rho);
                let mut e: f64 = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        let r = curved.second_form[n][i][j]
                            - euclid.second_form[n][i][j]
                            - terms.h[i][j];
                        e = e.max(r.abs());
                    }
                }
                let hm = curved.mean_curvature[n] - euclid.mean_curvature[n] - terms.mean;
                (e, hm.abs())
            })
            .collect();
        residuals.push(per_node.iter().fold(0.0f64, |a, b| a.max(b.0)));
        mean_res.push(per_node.iter().fold(0.0f64, |a, b| a.max(b.1)));
    }
    let floor = 1e-13;
    let (order, r_squared) = if residuals.iter().all(|r| *r < floor * radii[0].powi(3)) {
        // the truncation is exact to rounding
        (f64::INFINITY, 1.0)
    } else {
        log_log_slope(radii, &residuals)
    };
    let mean_curvature_order = if mean_res.iter().all(|r| *r < floor / radii[0]) {
        f64::INFINITY
    } else {
        log_log_slope(radii, &mean_res).0
    };
    if r_squared < 0.99 {
        return Err(LabError::FitUnstable(format!(
            "order regression R² = {r_squared:.4} below 0.99; residuals {residuals:?}"
        )));
    }
    Ok(OrderCheck {
        radii: radii.to_vec(),
        residuals,
        order,
        r_squared,
        mean_curvature_residuals: mean_res,
        mean_curvature_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::{
        CoordinateSphere, ConstantPerturbation, QuadraticPerturbation, ZeroPerturbation,
    };
    use proptest::prelude::*;

    fn grid() -> SphereGrid {
        build_grid(16, 32).unwrap()
    }

    #[test]
    fn coarse_grids_rejected() {
        assert!(matches!(build_grid(4, 32), Err(LabError::GridTooCoarse { .. })));
        assert!(build_grid(8, 12).is_err());
        assert!(build_grid(8, 17).is_err());
    }

    #[test]
    fn quadrature_identities() {
        let g = build_grid(32, 64).unwrap();
        let total: f64 = g.weights.iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-13);
        for mu in 0..3 {
            let i2 = g.integrate_fn(|n| n.dir[mu].powi(2));
            let i4 = g.integrate_fn(|n| n.dir[mu].powi(4));
            assert!((i2 / (4.0 * PI / 3.0) - 1.0).abs() < 1e-12);
            assert!((i4 / (4.0 * PI / 5.0) - 1.0).abs() < 1e-12);
            for nu in 0..3 {
                if nu != mu {
                    let i22 = g.integrate_fn(|n| n.dir[mu].powi(2) * n.dir[nu].powi(2));
                    assert!((i22 / (4.0 * PI / 15.0) - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(g.integrate_fn(|n| n.dir[0] * n.dir[1] * n.dir[2]).abs() < 1e-13);
    }

    #[test]
    fn polynomial_exactness_degree() {
        // z^(2n−1) odd, z^(2n−2) even: exact up to degree 2n − 1
        let g = build_grid(8, 16).unwrap();
        let i = g.integrate_fn(|n| n.dir[2].powi(14));
        assert!((i - 4.0 * PI / 15.0).abs() < 1e-13);
    }

    #[test]
    fn fornberg_centered_weights() {
        let c = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let e = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for k in 0..5 {
            assert!((c[1][k] - e[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_round_sphere_geometry() {
        let g = grid();
        let m = MetricField::euclidean();
        let rho = 0.7;
        let s = perturbed_sphere_surface(&m, &[0.1, 0.2, 0.3], rho, &ZeroPerturbation, &g, &GeodesicConfig::default())
            .unwrap();
        for n in 0..g.len() {
            let st = g.nodes[n].theta1.sin();
            assert!((s.mean_curvature[n] - 2.0 / rho).abs() < 1e-12);
            assert!((s.gauss_product[n] - 1.0 / (rho * rho)).abs() < 1e-12);
            assert!((s.first_form[n][0][0] - rho * rho).abs() < 1e-12);
            assert!((s.first_form[n][1][1] - rho * rho * st * st).abs() < 1e-12);
            assert!(s.first_form[n][0][1].abs() < 1e-12);
        }
        let r = hawking_mass(&s, 0).unwrap();
        assert!(r.hawking.abs() < 1e-13);
        assert!((r.area - 4.0 * PI * rho * rho).abs() < 1e-12);
    }

    #[test]
    fn normal_is_unit_and_orthogonal() {
        let g = grid();
        let m = MetricField::schwarzschild(1.0);
        let w = QuadraticPerturbation {
            a: [[0.05, 0.02, 0.0], [0.02, -0.04, 0.01], [0.0, 0.01, 0.0]],
            c: 0.0,
        };
        let s = perturbed_sphere_surface(&m, &[0.0, 3.0, 2.0], 0.5, &w, &g, &GeodesicConfig::default())
            .unwrap();
        for n in 0..g.len() {
            let gm = m.metric_t(&s.positions[n]);
            assert!((bilinear(&gm, &s.normal[n], &s.normal[n]) - 1.0).abs() < 1e-9);
            for i in 0..2 {
                assert!(bilinear(&gm, &s.normal[n], &s.tangents[n][i]).abs() < 1e-9);
            }
            // recomputation of H and D from the stored forms
            let (gi, det) = inv2(&s.first_form[n]);
            let h = &s.second_form[n];
            let hh: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| gi[i][j] * h[i][j]).sum();
            assert!((hh - s.mean_curvature[n]).abs() < 1e-12 * hh.abs());
            let d = (h[0][0] * h[1][1] - h[0][1] * h[1][0]) / det;
            assert!((d - s.gauss_product[n]).abs() < 1e-12 * d.abs());
            assert!(s.mean_curvature[n] > 0.0);
        }
        // the graph formula Ñ = −Θ + a^j Z_j at w = 0 in flat space is −Θ
        let f = perturbed_sphere_surface(&MetricField::euclidean(), &[0.0; 3], 0.5, &ZeroPerturbation, &g, &GeodesicConfig::default())
            .unwrap();
        for n in 0..g.len() {
            for k in 0..3 {
                assert!((f.normal[n][k] + g.nodes[n].dir[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn schwarzschild_coordinate_spheres() {
        let g = grid();
        let m = MetricField::schwarzschild(1.0);
        for r in [2.2, 2.5, 4.0, 8.0] {
            let emb = CoordinateSphere { center: [0.0; 3], radius: r };
            let sample = sample_embedding(&emb, &g, JetOrder::Second).unwrap();
            let s = extrinsic_geometry(&m, &sample, &g).unwrap();
            let h = 2.0 / r * (1.0 - 2.0 / r).sqrt();
            for n in 0..g.len() {
                assert!((s.mean_curvature[n] - h).abs() < 1e-7);
            }
            let rep = hawking_mass(&s, 0).unwrap();
            assert!((rep.hawking - 1.0).abs() < 1e-6, "r={r}: {}", rep.hawking);
            assert!((rep.area - 4.0 * PI * r * r).abs() < 1e-10 * r * r);
        }
    }

    #[test]
    fn hyperbolic_geodesic_spheres() {
        let g = grid();
        let m = MetricField::hyperbolic(1.0);
        for rho in [0.2, 0.5, 1.0] {
            let s = perturbed_sphere_surface(&m, &[0.1, -0.2, 0.05], rho, &ZeroPerturbation, &g, &GeodesicConfig::precise())
                .unwrap();
            for n in 0..g.len() {
                assert!((s.mean_curvature[n] - 2.0 / rho.tanh()).abs() < 1e-7);
            }
            let rep = hawking_mass(&s, -1).unwrap();
            assert!(rep.generalized.abs() < 1e-8, "{}", rep.generalized);
            let recomputed = (rep.area / (16.0 * PI).powi(3)).sqrt()
                * (16.0 * PI - rep.willmore + 4.0 * rep.area);
            assert!((recomputed - rep.generalized).abs() < 1e-12 * rep.area.sqrt());
        }
    }

    #[test]
    fn finite_difference_route_converges() {
        let m = MetricField::schwarzschild(1.0);
        let w = QuadraticPerturbation {
            a: [[0.03, 0.0, 0.01], [0.0, -0.02, 0.0], [0.01, 0.0, -0.01]],
            c: 0.0,
        };
        let cfg = GeodesicConfig::precise();
        let mut errs = Vec::new();
        let mut mass_errs = Vec::new();
        for nt in [16usize, 32, 64] {
            let g = build_grid(nt, 2 * nt).unwrap();
            let emb = PerturbedSphere::new(&m, &[0.0, 0.0, 4.0], 0.6, &w, &cfg).unwrap();
            let jets = sample_embedding(&emb, &g, JetOrder::Second).unwrap();
            let exact = extrinsic_geometry(&m, &jets, &g).unwrap();
            let mut pos_only = sample_embedding(&emb, &g, JetOrder::Value).unwrap();
            pos_only.tangents.clear();
            let fd = extrinsic_geometry(&m, &pos_only, &g).unwrap();
            let e = exact
                .mean_curvature
                .iter()
                .zip(&fd.mean_curvature)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            errs.push(e);
            mass_errs.push((hawking_mass(&exact, 0).unwrap().hawking - hawking_mass(&fd, 0).unwrap().hawking).abs());
        }
        // pointwise H loses accuracy next to the poles, where g^22 ~ 1/sin²
        let nts = [16.0, 32.0, 64.0];
        let (pointwise, _) = log_log_slope(&nts, &errs);
        let (integrated, _) = log_log_slope(&nts, &mass_errs);
        assert!(-pointwise >= 3.0, "{errs:?}");
        assert!(-integrated >= 3.5, "{mass_errs:?}");
    }

    #[test]
    fn flat_perturbations_have_negative_mass() {
        let g = grid();
        let m = MetricField::euclidean();
        let w = QuadraticPerturbation {
            a: [[0.1, 0.0, 0.0], [0.0, -0.1, 0.0], [0.0, 0.0, 0.0]],
            c: 0.0,
        };
        let s = perturbed_sphere_surface(&m, &[0.0; 3], 0.3, &w, &g, &GeodesicConfig::default()).unwrap();
        assert!(hawking_mass(&s, 0).unwrap().hawking < 0.0);
        assert!(hawking_mass(&s, 2).is_err());
    }

    #[test]
    fn order_check_flat_is_exact() {
        let g = grid();
        let w = ConstantPerturbation(0.0);
        let radii: Vec<f64> = (0..5).map(|k| 0.4 * 0.5f64.powi(k)).collect();
        let oc = expansion_order_check(&MetricField::euclidean(), &[0.0; 3], &w, &radii, &g, &GeodesicConfig::default())
            .unwrap();
        assert!(oc.residuals.iter().all(|r| *r < 1e-14));
    }

    #[test]
    fn surface_csv_has_header_and_rows() {
        let g = build_grid(8, 16).unwrap();
        let s = perturbed_sphere_surface(&MetricField::euclidean(), &[0.0; 3], 1.0, &ZeroPerturbation, &g, &GeodesicConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        write_surface_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta1,theta2,x,y,z,H,dA\n"));
        assert_eq!(text.lines().count(), 1 + g.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn flat_willmore_inequality(a in prop::array::uniform3(-0.03f64..0.03), b in prop::array::uniform3(-0.03f64..0.03)) {
            // l = 2 (traceless quadratic) plus an l = 3 piece
            let g = grid();
            struct W { a: Mat3<f64>, b: [f64; 3] }
            impl Perturbation for W {
                fn value<T: Real>(&self, t: &Vec3<T>) -> T {
                    let mut v = T::zero();
                    for i in 0..3 { for j in 0..3 { v += t[i] * t[j] * self.a[i][j]; } }
                    v + t[0] * t[1] * t[2] * self.b[0] + (t[2] * t[2] * 5.0 - 3.0) * t[2] * self.b[1]
                        + (t[0] * t[0] - t[1] * t[1] * 3.0) * t[0] * self.b[2]
                }
            }
            let w = W { a: [[a[0], a[1], 0.0], [a[1], a[2], b[0]], [0.0, b[0], -a[0] - a[2]]], b };
            let s = perturbed_sphere_surface(&MetricField::euclidean(), &[0.0; 3], 0.5, &w, &g, &GeodesicConfig::default()).unwrap();
            let r = hawking_mass(&s, 0).unwrap();
            prop_assert!(r.willmore >= 16.0 * PI - 1e-8);
            prop_assert!(r.hawking <= 1e-10);
        }
    }
}
