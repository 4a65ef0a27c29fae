//! Piecewise-linear discontinuous functions on a [`Mesh`].
//!
//! Coefficients are nodal: entry `3 t + j` is the value on triangle `t` at its
//! `j`-th vertex, so the local basis is the barycentric coordinates.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{AmotError, Result};
use crate::mesh::{Geometry, Mesh, TriKey};
use crate::quadrature::TRIANGLE_DEG4;
use crate::sparse::{Block, BlockCsr};

#[derive(Debug, Clone)]
pub struct DgFunction {
    mesh: Arc<Mesh>,
    coeffs: Vec<f64>,
}

/// True if both meshes describe the same partition (not necessarily the same allocation).
pub fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || a.same_partition(b)
}

impl DgFunction {
    pub fn new(mesh: Arc<Mesh>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mesh.num_dofs() {
            return Err(AmotError::DimensionMismatch {
                expected: mesh.num_dofs(),
                got: coeffs.len(),
            });
        }
        Ok(DgFunction { mesh, coeffs })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.num_dofs();
        DgFunction {
            mesh,
            coeffs: vec![c; n],
        }
    }

    /// Vertex interpolation of `f` on every triangle.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut coeffs = Vec::with_capacity(mesh.num_dofs());
        for t in 0..mesh.num_triangles() {
            for p in mesh.corners(t) {
                coeffs.push(f(p[0], p[1]));
            }
        }
        DgFunction { mesh, coeffs }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    #[inline]
    pub fn local(&self, t: usize) -> [f64; 3] {
        [self.coeffs[3 * t], self.coeffs[3 * t + 1], self.coeffs[3 * t + 2]]
    }

    /// Value on triangle `t` at barycentric coordinates `bary`.
    pub fn evaluate(&self, t: usize, bary: [f64; 3]) -> Result<f64> {
        self.mesh.check_triangle(t)?;
        let c = self.local(t);
        Ok(c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2])
    }

    /// Value of the polynomial of triangle `t` at a physical point.
    pub fn evaluate_at(&self, t: usize, x: [f64; 2]) -> Result<f64> {
        self.mesh.check_triangle(t)?;
        self.evaluate(t, self.mesh.geometry(t).barycentric(x))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_same_mesh(&self, other: &DgFunction) -> Result<()> {
        if same_mesh(&self.mesh, &other.mesh) {
            Ok(())
        } else {
            Err(AmotError::MeshMismatch)
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &DgFunction) -> Result<DgFunction> {
        self.check_same_mesh(other)?;
        Ok(DgFunction {
            mesh: self.mesh.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + s * b).collect(),
        })
    }
}

/// `(|E| / 12) [[2,1,1],[1,2,1],[1,1,2]]`
pub fn local_mass(area: f64) -> Block {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn local_mass_inverse(area: f64) -> Block {
    let d = 9.0 / area;
    let o = -3.0 / area;
    [[d, o, o], [o, d, o], [o, o, d]]
}

pub fn mass_matrix(mesh: &Mesh) -> BlockCsr {
    BlockCsr::block_diagonal(
        (0..mesh.num_triangles())
            .map(|t| local_mass(mesh.geometry(t).area))
            .collect(),
    )
}

/// Per-element `||u - v||_{L2(E)}` and their root-sum-square. `v = None` means zero.
pub fn l2_norm_per_element(u: &DgFunction, v: Option<&DgFunction>) -> Result<(f64, Vec<f64>)> {
    if let Some(v) = v {
        u.check_same_mesh(v)?;
    }
    let mesh = u.mesh();
    let mut per = Vec::with_capacity(mesh.num_triangles());
    let mut total2 = 0.0;
    for t in 0..mesh.num_triangles() {
        let mut d = u.local(t);
        if let Some(v) = v {
            let w = v.local(t);
            for i in 0..3 {
                d[i] -= w[i];
            }
        }
        let m = local_mass(mesh.geometry(t).area);
        let mut q = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                q += d[i] * m[i][j] * d[j];
            }
        }
        let q = q.max(0.0);
        total2 += q;
        per.push(q.sqrt());
    }
    Ok((total2.sqrt(), per))
}

pub fn l2_norm(u: &DgFunction) -> f64 {
    l2_norm_per_element(u, None).map(|(n, _)| n).unwrap_or(f64::NAN)
}

/// Moves `u` onto `target`, which must share `u`'s bisection hierarchy.
///
/// Target triangles inside a source triangle get the exact restriction of its
/// polynomial; target triangles covering several source triangles get the local
/// L2 projection of the piecewise-linear data.
pub fn transfer(u: &DgFunction, target: &Arc<Mesh>) -> Result<DgFunction> {
    let source = u.mesh();
    if !source.same_hierarchy(target) {
        return Err(AmotError::HierarchyMismatch);
    }
    if same_mesh(source, target) {
        return DgFunction::new(target.clone(), u.coeffs.clone());
    }
    let by_key: HashMap<TriKey, usize> = source
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| (tri.key, t))
        .collect();
    let max_depth = source.max_generation();

    let mut coeffs = Vec::with_capacity(target.num_dofs());
    let mut stack = Vec::new();
    let mut leaves = Vec::new();
    for t in 0..target.num_triangles() {
        let key = target.triangle(t).key;
        let corners = target.corners(t);

        let mut anc = Some(key);
        let mut host = None;
        while let Some(k) = anc {
            if let Some(&s) = by_key.get(&k) {
                host = Some(s);
                break;
            }
            anc = k.parent();
        }
        if let Some(s) = host {
            let g = source.geometry(s);
            let c = u.local(s);
            for p in corners {
                let l = g.barycentric(p);
                coeffs.push(c[0] * l[0] + c[1] * l[1] + c[2] * l[2]);
            }
            continue;
        }

        leaves.clear();
        stack.clear();
        stack.push(key);
        while let Some(k) = stack.pop() {
            if let Some(&s) = by_key.get(&k) {
                leaves.push(s);
            } else if k.generation() < max_depth {
                stack.push(k.child(1));
                stack.push(k.child(0));
            } else {
                return Err(AmotError::HierarchyMismatch);
            }
        }
        let tg = target.geometry(t);
        let mut rhs = [0.0; 3];
        for &s in &leaves {
            let sg = source.geometry(s);
            let sc = source.corners(s);
            let c = u.local(s);
            for (l, w) in TRIANGLE_DEG4.iter() {
                let x = [
                    l[0] * sc[0][0] + l[1] * sc[1][0] + l[2] * sc[2][0],
                    l[0] * sc[0][1] + l[1] * sc[1][1] + l[2] * sc[2][1],
                ];
                let val = (c[0] * l[0] + c[1] * l[1] + c[2] * l[2]) * 2.0 * sg.area * w;
                let phi = tg.barycentric(x);
                for j in 0..3 {
                    rhs[j] += val * phi[j];
                }
            }
        }
        let inv = local_mass_inverse(tg.area);
        for row in &inv {
            coeffs.push(row[0] * rhs[0] + row[1] * rhs[1] + row[2] * rhs[2]);
        }
    }
    DgFunction::new(target.clone(), coeffs)
}

/// Red-refines a triangle `levels` times (4^levels sub-triangles).
fn subdivide(corners: [[f64; 2]; 3], levels: usize) -> Vec<[[f64; 2]; 3]> {
    let mut tris = vec![corners];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let mid = |p: [f64; 2], q: [f64; 2]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        tris = next;
    }
    tris
}

/// Element-wise L2 projection of `f`. `levels(t, corners)` selects how many
/// red subdivisions are used to integrate on triangle `t`.
pub fn project(
    mesh: Arc<Mesh>,
    f: impl Fn(f64, f64) -> f64,
    levels: impl Fn(usize, &[[f64; 2]; 3]) -> usize,
) -> DgFunction {
    let mut coeffs = Vec::with_capacity(mesh.num_dofs());
    for t in 0..mesh.num_triangles() {
        let corners = mesh.corners(t);
        let g: &Geometry = mesh.geometry(t);
        let mut rhs = [0.0; 3];
        for sub in subdivide(corners, levels(t, &corners)) {
            let sub_area = 0.5
                * ((sub[1][0] - sub[0][0]) * (sub[2][1] - sub[0][1])
                    - (sub[2][0] - sub[0][0]) * (sub[1][1] - sub[0][1]));
            for (l, w) in TRIANGLE_DEG4.iter() {
                let x = [
                    l[0] * sub[0][0] + l[1] * sub[1][0] + l[2] * sub[2][0],
                    l[0] * sub[0][1] + l[1] * sub[1][1] + l[2] * sub[2][1],
                ];
                let val = f(x[0], x[1]) * 2.0 * sub_area * w;
                let phi = g.barycentric(x);
                for j in 0..3 {
                    rhs[j] += val * phi[j];
                }
            }
        }
        let inv = local_mass_inverse(g.area);
        for row in &inv {
            coeffs.push(row[0] * rhs[0] + row[1] * rhs[1] + row[2] * rhs[2]);
        }
    }
    DgFunction { mesh, coeffs }
}
