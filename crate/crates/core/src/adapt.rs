//! Error estimation and adaptation decisions.
//!
//! The temporal estimate is the embedded order-3/order-2 difference. The
//! spatial estimate compares the order-3 solution with one computed on an
//! auxiliary mesh obtained by bisecting the bulk of a residual indicator.

use std::sync::Arc;

use crate::dgspace::{l2_norm_per_element, same_mesh, transfer, DgFunction};
use crate::error::{AmotError, Result};
use crate::mesh::Mesh;
use crate::quadrature::{EDGE_GAUSS3, TRIANGLE_DEG6};
use crate::ros3p::{step, Ros3pTableau, StepStats};
use crate::sipg::{ModelParams, SpatialOperator};
use crate::sparse::SolverOptions;
use crate::velocity::VelocityField;

/// How per-element spatial estimates are compared with the refine/coarsen thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdConvention {
    /// Compare the element norm `(eps_S)_E`.
    #[default]
    Norm,
    /// Compare the squared element norm `(eps_S)_E^2`.
    Squared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmotConfig {
    pub tol: f64,
    /// Temporal share of `tol`.
    pub alpha: f64,
    /// Safety factor of the step-size controller.
    pub rho: f64,
    /// Bulk fraction for the auxiliary mesh.
    pub theta: f64,
    /// Elements with `(eps_S)_E > refine_frac * TOL_S` are refined.
    pub refine_frac: f64,
    /// Elements with `(eps_S)_E < coarsen_abs` are coarsened.
    pub coarsen_abs: f64,
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub growth_max: f64,
    /// Lower bound on the per-proposal step ratio.
    pub shrink_min: f64,
    pub convention: ThresholdConvention,
}

impl Default for AmotConfig {
    fn default() -> Self {
        AmotConfig {
            tol: 1e-3,
            alpha: 0.5,
            rho: 0.9,
            theta: 0.9,
            refine_frac: 0.005,
            coarsen_abs: 1e-13,
            tau0: 1e-4,
            tau_min: 1e-8,
            tau_max: 0.006,
            growth_max: 5.0,
            shrink_min: 0.2,
            convention: ThresholdConvention::Norm,
        }
    }
}

impl AmotConfig {
    pub fn tol_t(&self) -> f64 {
        self.alpha * self.tol
    }

    pub fn tol_s(&self) -> f64 {
        (1.0 - self.alpha) * self.tol
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(AmotError::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {v}"
                )))
            }
        };
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(AmotError::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        open_unit("alpha", self.alpha)?;
        open_unit("rho", self.rho)?;
        open_unit("theta", self.theta)?;
        open_unit("shrink_min", self.shrink_min)?;
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau0 && self.tau0 <= self.tau_max) {
            return Err(AmotError::InvalidArgument(format!(
                "need 0 < tau_min <= tau0 <= tau_max, got {} / {} / {}",
                self.tau_min, self.tau0, self.tau_max
            )));
        }
        if !(self.growth_max >= 1.0) {
            return Err(AmotError::InvalidArgument(format!(
                "growth_max must be at least 1, got {}",
                self.growth_max
            )));
        }
        if !(self.refine_frac > 0.0 && self.coarsen_abs >= 0.0) {
            return Err(AmotError::InvalidArgument(
                "marking thresholds must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Everything needed to take a Rosenbrock step on an arbitrary mesh.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: ModelParams,
    pub field: VelocityField,
    pub tableau: Ros3pTableau,
    pub solver: SolverOptions,
}

impl Problem {
    pub fn new(params: ModelParams, field: VelocityField) -> Self {
        Problem {
            params,
            field,
            tableau: Ros3pTableau::ros3p(),
            solver: SolverOptions::default(),
        }
    }

    pub fn operator(&self, mesh: Arc<Mesh>) -> SpatialOperator {
        SpatialOperator::new(mesh, &self.params, &self.field)
    }
}

/// `||u3 - u2||_{L2}` on their common mesh.
pub fn temporal_estimator(u3: &DgFunction, u2: &DgFunction) -> Result<f64> {
    Ok(l2_norm_per_element(u3, Some(u2))?.0)
}

/// Step size for the next attempt after a step of size `tau` produced `eps_t`.
pub fn propose_tau(eps_t: f64, tau: f64, cfg: &AmotConfig) -> f64 {
    let factor = if eps_t > 0.0 {
        (cfg.rho * cfg.tol_t() / eps_t)
            .cbrt()
            .clamp(cfg.shrink_min, cfg.growth_max)
    } else {
        cfg.growth_max
    };
    (factor * tau).clamp(cfg.tau_min, cfg.tau_max)
}

/// Per-element residual indicator and its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorReport {
    pub total: f64,
    pub eta: Vec<f64>,
    pub cell: Vec<f64>,
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Residual indicator of `u_new` after a step of size `tau` from `u_old`.
///
/// Cell part: `lambda_E^2 ||(u_new - u_old)/tau + div(V u_new) + r(u_new)||^2_E`
/// (the Laplacian of a linear polynomial vanishes). Edge parts:
/// interior edges contribute `eps^-1/2 lambda_e ||[eps grad u.n]||^2 + sigma eps / h_e ||[u]||^2`,
/// split evenly between both sides; boundary edges contribute
/// `eps^-1/2 lambda_e ||eps grad u.n||^2`. Weights are `lambda = min(h eps^-1/2, 1)`.
pub fn residual_indicator(
    u_new: &DgFunction,
    u_old: &DgFunction,
    tau: f64,
    params: &ModelParams,
    field: &VelocityField,
) -> Result<IndicatorReport> {
    if !same_mesh(u_new.mesh(), u_old.mesh()) {
        return Err(AmotError::MeshMismatch);
    }
    if !(tau > 0.0) {
        return Err(AmotError::InvalidArgument(format!(
            "step size must be positive, got {tau}"
        )));
    }
    let mesh = u_new.mesh();
    let eps = params.epsilon;
    let inv_sqrt_eps = eps.sqrt().recip();
    let weight = |h: f64| (h * inv_sqrt_eps).min(1.0);
    let n = mesh.num_triangles();
    // Written relative to vertex 0 so constants have exactly zero gradient.
    let grad = |t: usize| {
        let g = mesh.geometry(t);
        let c = u_new.local(t);
        [0, 1].map(|d| (c[1] - c[0]) * g.grads[1][d] + (c[2] - c[0]) * g.grads[2][d])
    };
    let at = |c: [f64; 3], l: &[f64; 3]| c[0] + l[1] * (c[1] - c[0]) + l[2] * (c[2] - c[0]);

    let mut cell = vec![0.0; n];
    for (t, cell_t) in cell.iter_mut().enumerate() {
        let g = mesh.geometry(t);
        let p = mesh.corners(t);
        let cn = u_new.local(t);
        let co = u_old.local(t);
        let du = grad(t);
        let mut sum = 0.0;
        for (l, w) in TRIANGLE_DEG6.iter() {
            let x = [0, 1].map(|d| l[0] * p[0][d] + l[1] * p[1][d] + l[2] * p[2][d]);
            let un = at(cn, l);
            let uo = at(co, l);
            let adv = dot2(field.at(x[0], x[1]), du) + field.divergence(x[0], x[1]) * un;
            let r = (un - uo) / tau + adv + params.reaction.eval(un, eps).0;
            sum += w * r * r;
        }
        let lambda = weight(g.diameter);
        *cell_t = lambda * lambda * 2.0 * g.area * sum;
    }

    let mut interior = vec![0.0; n];
    let mut boundary = vec![0.0; n];
    for e in mesh.edges() {
        let lam = weight(e.length) * inv_sqrt_eps;
        let l = e.left.triangle;
        let gl = grad(l);
        match e.right {
            None => {
                let flux = eps * dot2(gl, e.normal);
                boundary[l] += lam * flux * flux * e.length;
            }
            Some(r) => {
                let r = r.triangle;
                let gr = grad(r);
                let jump_flux = eps * (dot2(gl, e.normal) - dot2(gr, e.normal));
                let [pa, pb] = e.vertices.map(|v| mesh.vertices()[v]);
                let mut jump2 = 0.0;
                for (s, w) in EDGE_GAUSS3.iter() {
                    let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let j = at(u_new.local(l), &mesh.geometry(l).barycentric(x))
                        - at(u_new.local(r), &mesh.geometry(r).barycentric(x));
                    jump2 += w * j * j;
                }
                jump2 *= e.length;
                let c = lam * jump_flux * jump_flux * e.length + params.sigma * eps / e.length * jump2;
                interior[l] += 0.5 * c;
                interior[r] += 0.5 * c;
            }
        }
    }

    let eta: Vec<f64> = (0..n).map(|t| (cell[t] + interior[t] + boundary[t]).sqrt()).collect();
    let total = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(IndicatorReport {
        total,
        eta,
        cell: cell.into_iter().map(f64::sqrt).collect(),
        interior: interior.into_iter().map(f64::sqrt).collect(),
        boundary: boundary.into_iter().map(f64::sqrt).collect(),
    })
}

/// Smallest greedy set (largest indicators first, ties by index) carrying a
/// `theta` share of the squared indicator sum. Returned in ascending order.
pub fn bulk_mark(eta: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = eta.iter().map(|e| e * e).sum();
    if theta <= 0.0 || total <= 0.0 {
        return Vec::new();
    }
    let positive = || (0..eta.len()).filter(|&i| eta[i] > 0.0);
    if theta >= 1.0 {
        return positive().collect();
    }
    let mut order: Vec<usize> = positive().collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let goal = theta * total;
    let mut acc = 0.0;
    let mut count = order.len();
    for (k, &i) in order.iter().enumerate() {
        acc += eta[i] * eta[i];
        if acc >= goal {
            count = k + 1;
            break;
        }
    }
    order.truncate(count);
    order.sort_unstable();
    order
}

#[derive(Debug, Clone)]
pub struct SpatialEstimate {
    pub total: f64,
    /// One value per triangle of the working mesh.
    pub per_element: Vec<f64>,
    pub fine_mesh: Arc<Mesh>,
    pub stats: StepStats,
}

/// Compares `u3` with the order-3 solution of one step of size `tau` from
/// `u_prev`, computed on the working mesh with the `bulk` triangles bisected.
pub fn spatial_estimator(
    u3: &DgFunction,
    u_prev: &DgFunction,
    tau: f64,
    bulk: &[usize],
    problem: &Problem,
) -> Result<SpatialEstimate> {
    let coarse = u3.mesh();
    if bulk.is_empty() {
        return Ok(SpatialEstimate {
            total: 0.0,
            per_element: vec![0.0; coarse.num_triangles()],
            fine_mesh: coarse.clone(),
            stats: StepStats::default(),
        });
    }
    let fine = Arc::new(coarse.refine(bulk)?);
    let start = transfer(u_prev, &fine)?;
    let op = problem.operator(fine.clone());
    let out = step(&problem.tableau, &start, tau, &op, &problem.params, &problem.solver)?;
    let u3_fine = transfer(u3, &fine)?;
    Ok(SpatialEstimate {
        stats: out.stats,
        ..aggregate(&out.u3, &u3_fine, coarse)?
    })
}

/// Per-fine-element L2 differences summed in square onto the containing
/// triangles of `coarse`.
pub fn aggregate(fine_a: &DgFunction, fine_b: &DgFunction, coarse: &Arc<Mesh>) -> Result<SpatialEstimate> {
    let (_, per_fine) = l2_norm_per_element(fine_a, Some(fine_b))?;
    let fine = fine_a.mesh();
    let owner = fine.ancestors_in(coarse)?;
    let mut sq = vec![0.0; coarse.num_triangles()];
    for (d, &o) in per_fine.iter().zip(&owner) {
        sq[o] += d * d;
    }
    let total = sq.iter().sum::<f64>().sqrt();
    Ok(SpatialEstimate {
        total,
        per_element: sq.into_iter().map(f64::sqrt).collect(),
        fine_mesh: fine.clone(),
        stats: StepStats::default(),
    })
}

/// Refine and coarsen sets from per-element spatial estimates.
pub fn mark_space(per_element: &[f64], cfg: &AmotConfig) -> (Vec<usize>, Vec<usize>) {
    let value = |v: f64| match cfg.convention {
        ThresholdConvention::Norm => v,
        ThresholdConvention::Squared => v * v,
    };
    let refine_at = cfg.refine_frac * cfg.tol_s();
    let mut refine = Vec::new();
    let mut coarsen = Vec::new();
    for (t, &v) in per_element.iter().enumerate() {
        let v = value(v);
        if v > refine_at {
            refine.push(t);
        } else if v < cfg.coarsen_abs {
            coarsen.push(t);
        }
    }
    (refine, coarsen)
}

/// All estimator output of one pass through the adaptive loop.
#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub eps_t: f64,
    pub eps_s: f64,
    pub eps_s_per_element: Vec<f64>,
    pub indicator: IndicatorReport,
    pub bulk: Vec<usize>,
    pub marked_refine: Vec<usize>,
    pub marked_coarsen: Vec<usize>,
}
