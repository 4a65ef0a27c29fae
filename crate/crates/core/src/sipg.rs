//! Symmetric interior penalty discretization of
//! `-eps Lap u + div(V u)` with upwinded advection, plus the bistable reaction.
//!
//! The assembled stiffness `A` satisfies `(A u) . v = a_h(u, v)`; the full
//! semi-discrete right-hand side is `R(u) = -A u - B(u)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dgspace::{local_mass, mass_matrix, DgFunction};
use crate::error::{AmotError, Result};
use crate::mesh::{classify_edges, Mesh};
use crate::quadrature::{EDGE_GAUSS3, TRIANGLE_DEG4};
use crate::sparse::{Block, BlockBuilder, BlockCsr, ZERO_BLOCK};
use crate::velocity::VelocityField;

/// `f(u) = 2u(1-u)(1-2u)` and its derivative.
#[inline]
pub fn f_cubic(u: f64) -> (f64, f64) {
    let f = 2.0 * u - 6.0 * u * u + 4.0 * u * u * u;
    let fp = 2.0 - 12.0 * u + 12.0 * u * u;
    (f, fp)
}

/// The zeroth-order term of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reaction {
    /// `f(u) / eps`
    AllenCahn,
    /// `k u`
    Linear(f64),
    None,
}

impl Reaction {
    #[inline]
    pub(crate) fn eval(self, u: f64, epsilon: f64) -> (f64, f64) {
        match self {
            Reaction::AllenCahn => {
                let (f, fp) = f_cubic(u);
                (f / epsilon, fp / epsilon)
            }
            Reaction::Linear(k) => (k * u, k),
            Reaction::None => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Surface tension; the diffusion coefficient.
    pub epsilon: f64,
    /// Interior penalty parameter.
    pub sigma: f64,
    pub reaction: Reaction,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon: 0.01,
            sigma: 10.0,
            reaction: Reaction::AllenCahn,
        }
    }
}

impl ModelParams {
    pub fn new(epsilon: f64, sigma: f64) -> Result<Self> {
        let p = ModelParams {
            epsilon,
            sigma,
            reaction: Reaction::AllenCahn,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AmotError::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(AmotError::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

#[inline]
fn lerp(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

#[inline]
fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn add_diffusion(mesh: &Mesh, params: &ModelParams, builder: &mut BlockBuilder) {
    let eps = params.epsilon;
    for t in 0..mesh.num_triangles() {
        let g = mesh.geometry(t);
        let mut b = ZERO_BLOCK;
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = eps * g.area * dot2(g.grads[i], g.grads[j]);
            }
        }
        builder.add(t, t, &b);
    }

    for e in mesh.edges() {
        let Some(right) = e.right else { continue };
        let sides = [e.left.triangle, right.triangle];
        let signs = [1.0, -1.0];
        let geo = sides.map(|t| mesh.geometry(t));
        let gn: [[f64; 3]; 2] = geo.map(|g| [0, 1, 2].map(|i| dot2(g.grads[i], e.normal)));
        let [pa, pb] = e.vertices.map(|v| mesh.vertices()[v]);
        let penalty = params.sigma * eps / e.length;

        let mut blocks = [[ZERO_BLOCK; 2]; 2];
        for (s, w) in EDGE_GAUSS3.iter() {
            let x = lerp(pa, pb, s);
            let w = w * e.length;
            let phi = geo.map(|g| g.barycentric(x));
            for xs in 0..2 {
                for ys in 0..2 {
                    let b = &mut blocks[xs][ys];
                    for i in 0..3 {
                        for j in 0..3 {
                            b[i][j] += w
                                * (penalty * signs[xs] * signs[ys] * phi[xs][i] * phi[ys][j]
                                    - 0.5 * eps * signs[ys] * gn[xs][i] * phi[ys][j]
                                    - 0.5 * eps * signs[xs] * gn[ys][j] * phi[xs][i]);
                        }
                    }
                }
            }
        }
        for xs in 0..2 {
            for ys in 0..2 {
                builder.add(sides[xs], sides[ys], &blocks[xs][ys]);
            }
        }
    }
}

fn add_advection(mesh: &Mesh, field: &VelocityField, builder: &mut BlockBuilder) {
    if field.is_zero() {
        return;
    }
    for t in 0..mesh.num_triangles() {
        let g = mesh.geometry(t);
        let p = mesh.corners(t);
        let mut b = ZERO_BLOCK;
        for (l, w) in TRIANGLE_DEG4.iter() {
            let x = [
                l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            ];
            let v = field.at(x[0], x[1]);
            let div = field.divergence(x[0], x[1]);
            let w = 2.0 * g.area * w;
            for i in 0..3 {
                for j in 0..3 {
                    b[i][j] += w * (dot2(v, g.grads[j]) + div * l[j]) * l[i];
                }
            }
        }
        builder.add(t, t, &b);
    }

    let class = classify_edges(mesh, field);
    for e in mesh.edges() {
        let [pa, pb] = e.vertices.map(|v| mesh.vertices()[v]);
        let sides: Vec<_> = std::iter::once((e.left, 1.0))
            .chain(e.right.map(|r| (r, -1.0)))
            .collect();
        for (k, &(side, sign)) in sides.iter().enumerate() {
            if !class.is_inflow(side) {
                continue;
            }
            let own = side.triangle;
            let other = sides.get(1 - k).map(|(s, _)| s.triangle);
            let g_own = mesh.geometry(own);
            let g_other = other.map(|o| mesh.geometry(o));
            let n = [sign * e.normal[0], sign * e.normal[1]];
            let mut diag = ZERO_BLOCK;
            let mut off = ZERO_BLOCK;
            for (s, w) in EDGE_GAUSS3.iter() {
                let x = lerp(pa, pb, s);
                let vn = dot2(field.at(x[0], x[1]), n) * w * e.length;
                let phi = g_own.barycentric(x);
                let phi_out = g_other.map(|g| g.barycentric(x));
                for i in 0..3 {
                    for j in 0..3 {
                        diag[i][j] -= vn * phi[j] * phi[i];
                        if let Some(po) = phi_out {
                            off[i][j] += vn * po[j] * phi[i];
                        }
                    }
                }
            }
            builder.add(own, own, &diag);
            if let Some(o) = other {
                builder.add(own, o, &off);
            }
        }
    }
}

/// Element diffusion, interior penalty and symmetric consistency terms.
pub fn assemble_diffusion(mesh: &Mesh, params: &ModelParams) -> BlockCsr {
    let mut builder = BlockBuilder::new(mesh.num_triangles());
    add_diffusion(mesh, params, &mut builder);
    builder.finish()
}

/// Element advection and reaction `(V . grad u + div V u) v` plus the upwind edge terms.
pub fn assemble_advection(mesh: &Mesh, field: &VelocityField) -> BlockCsr {
    let mut builder = BlockBuilder::new(mesh.num_triangles());
    add_advection(mesh, field, &mut builder);
    builder.finish()
}

/// The full bilinear form `a_h`.
pub fn assemble_stiffness(mesh: &Mesh, params: &ModelParams, field: &VelocityField) -> BlockCsr {
    let mut builder = BlockBuilder::new(mesh.num_triangles());
    add_diffusion(mesh, params, &mut builder);
    add_advection(mesh, field, &mut builder);
    builder.finish()
}

/// `B(u)_i = int reaction(u_h) phi_i`, exact for P1 `u_h` and the cubic reaction.
pub fn assemble_nonlinear(u: &DgFunction, params: &ModelParams) -> Vec<f64> {
    let mesh = u.mesh();
    let mut out = vec![0.0; mesh.num_dofs()];
    if params.reaction == Reaction::None {
        return out;
    }
    for t in 0..mesh.num_triangles() {
        let area = mesh.geometry(t).area;
        let c = u.local(t);
        let local = &mut out[3 * t..3 * t + 3];
        for (l, w) in TRIANGLE_DEG4.iter() {
            let uq = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
            let (g, _) = params.reaction.eval(uq, params.epsilon);
            let gw = g * 2.0 * area * w;
            for i in 0..3 {
                local[i] += gw * l[i];
            }
        }
    }
    out
}

/// Blocks `int reaction'(u_h) phi_i phi_j` of the derivative of `B`.
pub fn nonlinear_jacobian_blocks(u: &DgFunction, params: &ModelParams) -> Vec<Block> {
    let mesh = u.mesh();
    (0..mesh.num_triangles())
        .map(|t| {
            let area = mesh.geometry(t).area;
            if let Reaction::Linear(k) = params.reaction {
                return local_mass(area).map(|r| r.map(|v| k * v));
            }
            let c = u.local(t);
            let mut b = ZERO_BLOCK;
            if params.reaction == Reaction::None {
                return b;
            }
            for (l, w) in TRIANGLE_DEG4.iter() {
                let uq = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
                let (_, gp) = params.reaction.eval(uq, params.epsilon);
                let gw = gp * 2.0 * area * w;
                for i in 0..3 {
                    for j in 0..3 {
                        b[i][j] += gw * l[i] * l[j];
                    }
                }
            }
            b
        })
        .collect()
}

/// `J_h = -A - N'(u)`, the derivative of `R(u) = -A u - B(u)`.
pub fn assemble_jacobian(u: &DgFunction, stiffness: &BlockCsr, params: &ModelParams) -> BlockCsr {
    let n = nonlinear_jacobian_blocks(u, params);
    stiffness.add_block_diagonal(&n).scaled(-1.0)
}

/// `R(u) = -A u - B(u)`.
pub fn residual(u: &DgFunction, stiffness: &BlockCsr, params: &ModelParams) -> Result<Vec<f64>> {
    let mut r = stiffness.matvec(u.coeffs())?;
    let b = assemble_nonlinear(u, params);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = -*ri - bi;
    }
    Ok(r)
}

/// Mass and stiffness matrices of one mesh.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    pub mesh: Arc<Mesh>,
    pub mass: BlockCsr,
    pub stiffness: BlockCsr,
}

impl SpatialOperator {
    pub fn new(mesh: Arc<Mesh>, params: &ModelParams, field: &VelocityField) -> Self {
        let mass = mass_matrix(&mesh);
        let stiffness = assemble_stiffness(&mesh, params, field);
        SpatialOperator { mesh, mass, stiffness }
    }
}

/// Smallest eigenvalue of the symmetric diffusion matrix, relative to its largest
/// entry. Meshes above a few hundred unknowns are checked on a 4x4 uniform mesh,
/// which has the same element shapes as every uniform start mesh.
pub fn diffusion_coercivity(mesh: &Mesh, params: &ModelParams) -> f64 {
    let probe;
    let mesh = if mesh.num_dofs() <= 400 {
        mesh
    } else {
        probe = Mesh::uniform(4).expect("n > 0");
        &probe
    };
    let d = assemble_diffusion(mesh, params);
    let n = d.dim();
    let rows = d.to_dense();
    let dense = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let scale = d.max_abs();
    let eig = dense.symmetric_eigenvalues();
    eig.iter().copied().fold(f64::INFINITY, f64::min) / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        for u in [0.0, 0.5, 1.0] {
            assert_eq!(f_cubic(u).0, 0.0);
        }
        assert!((f_cubic(0.25).0 - 0.1875).abs() < 1e-15);
        assert!((f_cubic(0.5).1 + 1.0).abs() < 1e-15);
        assert_eq!(f_cubic(0.0).1, 2.0);
        // against the factored form
        for &u in &[-0.3, 0.1, 0.7, 1.4] {
            let direct = 2.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
            assert!((f_cubic(u).0 - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 10.0).is_err());
        assert!(ModelParams::new(0.01, -1.0).is_err());
        assert!(ModelParams::new(0.01, 10.0).is_ok());
    }

    #[test]
    fn default_penalty_is_coercive() {
        let m = Mesh::uniform(4).unwrap();
        let lam = diffusion_coercivity(&m, &ModelParams::default());
        assert!(lam > -1e-12, "min eigenvalue {lam}");
        // too small a penalty loses coercivity
        let weak = ModelParams {
            sigma: 0.5,
            ..ModelParams::default()
        };
        assert!(diffusion_coercivity(&m, &weak) < -1e-6);
    }

    #[test]
    fn nonlinear_examples() {
        let m = Arc::new(Mesh::uniform(3).unwrap());
        let p = ModelParams::default();
        for c in [0.0, 0.5] {
            let b = assemble_nonlinear(&DgFunction::constant(m.clone(), c), &p);
            assert!(b.iter().all(|&v| v.abs() < 1e-15));
        }
        let b = assemble_nonlinear(&DgFunction::constant(m.clone(), 0.25), &p);
        let total: f64 = b.iter().sum();
        assert!((total - 75.0).abs() < 1e-11);
    }

    #[test]
    fn jacobian_blocks_at_constants() {
        let m = Arc::new(Mesh::uniform(2).unwrap());
        let p = ModelParams::default();
        for (c, factor) in [(0.0, 2.0), (0.5, -1.0)] {
            let blocks = nonlinear_jacobian_blocks(&DgFunction::constant(m.clone(), c), &p);
            for (t, b) in blocks.iter().enumerate() {
                let mass = local_mass(m.geometry(t).area);
                for i in 0..3 {
                    for j in 0..3 {
                        let expect = factor / p.epsilon * mass[i][j];
                        assert!((b[i][j] - expect).abs() < 1e-12 * expect.abs().max(1.0));
                    }
                }
            }
        }
    }
}
