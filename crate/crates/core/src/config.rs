//! JSON run configuration, one section per module.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::expansion::{SphereMode, Tolerances};
use crate::geodesics::GeodesicConfig;
use crate::manifold::{MetricField, MetricKind};
use crate::optimizer::OptimizeConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldSection {
    pub metric: MetricKind,
    pub point: [f64; 3],
    pub injectivity_bound: Option<f64>,
}

impl Default for ManifoldSection {
    fn default() -> Self {
        Self {
            metric: MetricKind::Euclidean,
            point: [0.0; 3],
            injectivity_bound: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceSection {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self { n_theta: 16, n_phi: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarmonicsSection {
    /// Radii of the Euler–Lagrange residual ladder.
    pub radii: Vec<f64>,
    /// Bound on the spectral residual of the optimal-perturbation PDE.
    pub pde_tol: f64,
    /// Minimum decay order of `ρ³ · sup |EL residual|`.
    pub el_min_order: f64,
}

impl Default for HarmonicsSection {
    fn default() -> Self {
        Self {
            radii: vec![0.2, 0.1, 0.05, 0.025],
            pde_tol: 1e-9,
            el_min_order: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionSection {
    pub rho0: f64,
    pub n: usize,
    pub mode: SphereMode,
    /// Cosmological sign `K ∈ {−1, 0, 1}`.
    pub k: i32,
    pub tolerances: Tolerances,
    /// Also run the unperturbed ladder and check `c₅(opt) − c₅(unp) = ‖S‖²/90`.
    pub traceless_difference: bool,
    pub traceless_rel_tol: f64,
    pub bartnik_rho: f64,
    pub validity_radius: f64,
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self {
            rho0: 0.2,
            n: 6,
            mode: SphereMode::Optimal,
            k: 0,
            tolerances: Tolerances::default(),
            traceless_difference: false,
            traceless_rel_tol: 0.10,
            bartnik_rho: 0.1,
            validity_radius: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    /// Target area is `4π rho²`.
    pub rho: f64,
    pub max_degree: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    pub fd_step: f64,
    pub grad_tol: f64,
    pub seed: u64,
    pub init_scale: f64,
    pub area_tol: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizeConfig::default();
        Self {
            rho: 0.05,
            max_degree: d.max_degree,
            max_iters: d.max_iters,
            initial_step: d.initial_step,
            shrink: d.shrink,
            max_backtracks: d.max_backtracks,
            fd_step: d.fd_step,
            grad_tol: d.grad_tol,
            seed: d.seed,
            init_scale: d.init_scale,
            area_tol: d.area_tol,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliSection {
    pub out_dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub manifold: ManifoldSection,
    pub geodesics: GeodesicConfig,
    pub surface: SurfaceSection,
    pub harmonics: HarmonicsSection,
    pub expansion: ExpansionSection,
    pub optimizer: OptimizerSection,
    pub cli: CliSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifold: ManifoldSection::default(),
            geodesics: GeodesicConfig::precise(),
            surface: SurfaceSection::default(),
            harmonics: HarmonicsSection::default(),
            expansion: ExpansionSection::default(),
            optimizer: OptimizerSection::default(),
            cli: CliSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.geodesics.validate()?;
        if !(-1..=1).contains(&self.expansion.k) {
            return Err(LabError::Config(format!("expansion.k = {} not in {{-1, 0, 1}}", self.expansion.k)));
        }
        if self.expansion.n < 5 {
            return Err(LabError::Config("expansion.n must be at least 5".into()));
        }
        if let Some(b) = self.manifold.injectivity_bound {
            if !(b > 0.0) {
                return Err(LabError::Config("manifold.injectivity_bound must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn metric(&self) -> Result<MetricField> {
        let m = MetricField::new(self.manifold.metric.clone())?;
        Ok(match self.manifold.injectivity_bound {
            Some(b) => m.with_injectivity_bound(b),
            None => m,
        })
    }

    pub fn optimize_config(&self) -> OptimizeConfig {
        let o = &self.optimizer;
        OptimizeConfig {
            max_degree: o.max_degree,
            max_iters: o.max_iters,
            initial_step: o.initial_step,
            shrink: o.shrink,
            max_backtracks: o.max_backtracks,
            fd_step: o.fd_step,
            grad_tol: o.grad_tol,
            seed: o.seed,
            init_scale: o.init_scale,
            n_theta: self.surface.n_theta,
            n_phi: self.surface.n_phi,
            area_tol: o.area_tol,
            geodesic: self.geodesics,
        }
    }
}
