//! Hierarchical conforming triangulations of `[-1, 1]^2`.
//!
//! Every triangle stores its vertices as `[v0, v1, v2]` in counter-clockwise
//! order with the refinement edge `(v0, v1)` and newest vertex `v2`. Local
//! edge `i` is the edge opposite vertex `i`, so the refinement edge is local
//! edge 2. Bisection of `[a, b, c]` at the midpoint `m` of `(a, b)` yields the
//! children `[c, a, m]` and `[b, c, m]`, which again follow the convention.
//!
//! A triangle's place in the refinement forest is encoded in its [`TriKey`]
//! (root triangle plus the sequence of child choices), so meshes derived from
//! the same initial mesh can be compared without a shared mutable tree.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{AmotError, Result};
use crate::velocity::VelocityField;

pub const DOMAIN_MIN: f64 = -1.0;
pub const DOMAIN_MAX: f64 = 1.0;
pub const DOMAIN_AREA: f64 = 4.0;

const MAX_DEPTH: u8 = 63;
const BOUNDARY_EPS: f64 = 1e-12;

/// Position of a triangle in the bisection forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriKey {
    root: u32,
    depth: u8,
    /// Bit `i` is the child taken at depth `i + 1`.
    path: u64,
}

impl TriKey {
    pub fn root(root: u32) -> Self {
        TriKey {
            root,
            depth: 0,
            path: 0,
        }
    }

    pub fn root_index(&self) -> u32 {
        self.root
    }

    pub fn generation(&self) -> u8 {
        self.depth
    }

    pub fn child(self, which: u8) -> Self {
        assert!(self.depth < MAX_DEPTH, "bisection depth limit reached");
        debug_assert!(which < 2);
        TriKey {
            root: self.root,
            depth: self.depth + 1,
            path: self.path | (u64::from(which) << self.depth),
        }
    }

    pub fn parent(self) -> Option<Self> {
        if self.depth == 0 {
            return None;
        }
        let depth = self.depth - 1;
        Some(TriKey {
            root: self.root,
            depth,
            path: self.path & !(1u64 << depth),
        })
    }

    /// Which child of its parent this is (0 or 1), `None` for roots.
    pub fn child_index(self) -> Option<u8> {
        (self.depth > 0).then(|| ((self.path >> (self.depth - 1)) & 1) as u8)
    }

    pub fn sibling(self) -> Option<Self> {
        let depth = self.depth.checked_sub(1)?;
        Some(TriKey {
            root: self.root,
            depth: self.depth,
            path: self.path ^ (1u64 << depth),
        })
    }

    /// True if `self` equals `other` or lies above it in the forest.
    pub fn contains(self, other: TriKey) -> bool {
        if self.root != other.root || self.depth > other.depth {
            return false;
        }
        let mask = if self.depth == 0 {
            0
        } else {
            u64::MAX >> (64 - u32::from(self.depth))
        };
        other.path & mask == self.path
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub key: TriKey,
}

/// Per-triangle geometric data, cached at mesh construction.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub area: f64,
    /// Gradients of the three barycentric coordinates.
    pub grads: [[f64; 2]; 3],
    pub centroid: [f64; 2],
    /// Longest edge length.
    pub diameter: f64,
}

impl Geometry {
    fn new(p: [[f64; 2]; 3]) -> Self {
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grads = [[0.0; 2]; 3];
        let mut diameter: f64 = 0.0;
        for i in 0..3 {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            let e = [b[0] - a[0], b[1] - a[1]];
            grads[i] = [-e[1] / area2, e[0] / area2];
            diameter = diameter.max(e[0].hypot(e[1]));
        }
        Geometry {
            area: 0.5 * area2,
            grads,
            centroid: [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0],
            diameter,
        }
    }

    /// Barycentric coordinates of a physical point (may be outside the triangle).
    #[inline]
    pub fn barycentric(&self, x: [f64; 2]) -> [f64; 3] {
        let d = [x[0] - self.centroid[0], x[1] - self.centroid[1]];
        let mut l = [0.0; 3];
        for (li, g) in l.iter_mut().zip(&self.grads) {
            *li = 1.0 / 3.0 + g[0] * d[0] + g[1] * d[1];
        }
        l
    }
}

/// One side of an edge: a triangle and the local index of the edge in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSide {
    pub triangle: usize,
    pub local: usize,
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoints in the counter-clockwise order of the left triangle.
    pub vertices: [usize; 2],
    pub left: EdgeSide,
    /// `None` on the domain boundary.
    pub right: Option<EdgeSide>,
    pub length: f64,
    /// Unit normal pointing out of the left triangle.
    pub normal: [f64; 2],
    pub midpoint: [f64; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// The initial mesh every derived mesh refines.
#[derive(Debug)]
struct Hierarchy {
    id: u64,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

static NEXT_HIERARCHY: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
pub struct Mesh {
    hierarchy: Arc<Hierarchy>,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    geometry: Vec<Geometry>,
}

impl Mesh {
    /// `n x n` squares on the domain, each cut along its lower-left to
    /// upper-right diagonal. The diagonal is the refinement edge of both halves.
    pub fn uniform(n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(AmotError::InvalidArgument("uniform mesh needs n >= 1".into()));
        }
        let h = (DOMAIN_MAX - DOMAIN_MIN) / n as f64;
        let coord = |i: usize| {
            if i == n {
                DOMAIN_MAX
            } else {
                DOMAIN_MIN + h * i as f64
            }
        };
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([coord(i), coord(j)]);
            }
        }
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (ll, lr, ur, ul) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                triangles.push([ur, ll, lr]);
                triangles.push([ll, ur, ul]);
            }
        }
        let hierarchy = Arc::new(Hierarchy {
            id: NEXT_HIERARCHY.fetch_add(1, Ordering::Relaxed),
            vertices: vertices.clone(),
            triangles: triangles.clone(),
        });
        let triangles = triangles
            .into_iter()
            .enumerate()
            .map(|(r, vertices)| Triangle {
                vertices,
                key: TriKey::root(r as u32),
            })
            .collect();
        Ok(Mesh::assemble(hierarchy, vertices, triangles))
    }

    fn assemble(hierarchy: Arc<Hierarchy>, vertices: Vec<[f64; 2]>, triangles: Vec<Triangle>) -> Mesh {
        let geometry: Vec<Geometry> = triangles
            .iter()
            .map(|t| Geometry::new(t.vertices.map(|v| vertices[v])))
            .collect();

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 8);
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for local in 0..3 {
                let a = tri.vertices[(local + 1) % 3];
                let b = tri.vertices[(local + 2) % 3];
                let key = (a.min(b), a.max(b));
                let side = EdgeSide { triangle: t, local };
                let id = *lookup.entry(key).or_insert_with(|| {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let length = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
                    edges.push(Edge {
                        vertices: [a, b],
                        left: side,
                        right: None,
                        length,
                        normal: [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length],
                        midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                    });
                    edges.len() - 1
                });
                let edge = &mut edges[id];
                if edge.left != side {
                    assert!(edge.right.is_none(), "edge shared by more than two triangles");
                    edge.right = Some(side);
                }
                triangle_edges[t][local] = id;
            }
        }

        Mesh {
            hierarchy,
            vertices,
            triangles,
            edges,
            triangle_edges,
            geometry,
        }
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> &Triangle {
        &self.triangles[t]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge ids of triangle `t`, indexed by local edge.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn geometry(&self, t: usize) -> &Geometry {
        &self.geometry[t]
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    pub fn check_triangle(&self, t: usize) -> Result<()> {
        if t < self.triangles.len() {
            Ok(())
        } else {
            Err(AmotError::InvalidTriangle {
                id: t,
                count: self.triangles.len(),
            })
        }
    }

    pub fn same_hierarchy(&self, other: &Mesh) -> bool {
        Arc::ptr_eq(&self.hierarchy, &other.hierarchy) || self.hierarchy.id == other.hierarchy.id
    }

    /// Same hierarchy and the same leaves in the same order.
    pub fn same_partition(&self, other: &Mesh) -> bool {
        self.same_hierarchy(other)
            && self.triangles.len() == other.triangles.len()
            && self.triangles.iter().zip(&other.triangles).all(|(a, b)| a.key == b.key)
    }

    /// The level-0 mesh this mesh was refined from.
    pub fn initial_mesh(&self) -> Mesh {
        let triangles = self
            .hierarchy
            .triangles
            .iter()
            .enumerate()
            .map(|(r, &vertices)| Triangle {
                vertices,
                key: TriKey::root(r as u32),
            })
            .collect();
        Mesh::assemble(self.hierarchy.clone(), self.hierarchy.vertices.clone(), triangles)
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn max_generation(&self) -> u8 {
        self.triangles.iter().map(|t| t.key.depth).max().unwrap_or(0)
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let p = self.corners(t);
                (0..3)
                    .map(|i| {
                        let a = p[i];
                        let b = p[(i + 1) % 3];
                        let c = p[(i + 2) % 3];
                        let u = [b[0] - a[0], b[1] - a[1]];
                        let v = [c[0] - a[0], c[1] - a[1]];
                        let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                        cos.clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn on_domain_boundary(&self, e: &Edge) -> bool {
        let [a, b] = e.vertices.map(|v| self.vertices[v]);
        (0..2).any(|d| {
            [DOMAIN_MIN, DOMAIN_MAX]
                .iter()
                .any(|&s| (a[d] - s).abs() < BOUNDARY_EPS && (b[d] - s).abs() < BOUNDARY_EPS)
        })
    }

    /// Checks every structural invariant; returns a description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (t, g) in self.geometry.iter().enumerate() {
            if g.area <= 0.0 {
                return Err(format!("triangle {t} has non-positive area {}", g.area));
            }
        }
        let area = self.total_area();
        if ((area - DOMAIN_AREA) / DOMAIN_AREA).abs() > 1e-12 {
            return Err(format!("areas sum to {area}"));
        }
        for (id, e) in self.edges.iter().enumerate() {
            if e.is_boundary() && !self.on_domain_boundary(e) {
                return Err(format!("edge {id} has one neighbour but is interior (hanging vertex)"));
            }
            if !e.is_boundary() && self.on_domain_boundary(e) {
                return Err(format!("boundary edge {id} has two neighbours"));
            }
        }
        let nested = self.triangles.iter().all(|t| {
            let root = &self.hierarchy.triangles[t.key.root as usize];
            let corners = root.map(|v| self.hierarchy.vertices[v]);
            let expected = descend(corners, t.key);
            t.vertices
                .iter()
                .zip(&expected)
                .all(|(&v, p)| (self.vertices[v][0] - p[0]).abs() < 1e-12 && (self.vertices[v][1] - p[1]).abs() < 1e-12)
        });
        if !nested {
            return Err("triangle does not match its bisection path".into());
        }
        Ok(())
    }

    /// Bisects every marked triangle at its refinement edge, plus whatever
    /// closure bisections are needed to keep the mesh conforming.
    pub fn refine(&self, marked: &[usize]) -> Result<Mesh> {
        for &t in marked {
            self.check_triangle(t)?;
        }
        let mut edge_marked = vec![false; self.edges.len()];
        let mut work: Vec<usize> = Vec::new();
        for &t in marked {
            let e = self.triangle_edges[t][2];
            if !edge_marked[e] {
                edge_marked[e] = true;
                work.push(e);
            }
        }
        // Closure: a triangle with any marked edge must have its refinement edge marked.
        while let Some(e) = work.pop() {
            let edge = &self.edges[e];
            for side in std::iter::once(edge.left).chain(edge.right) {
                let r = self.triangle_edges[side.triangle][2];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    work.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint_of: Vec<Option<usize>> = vec![None; self.edges.len()];
        let mut midpoint = |e: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
            *midpoint_of[e].get_or_insert_with(|| {
                let [a, b] = self.edges[e].vertices.map(|v| vertices[v]);
                vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                vertices.len() - 1
            })
        };

        let mut triangles = Vec::with_capacity(self.triangles.len() + 4 * marked.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let te = self.triangle_edges[t];
            if !edge_marked[te[2]] {
                debug_assert!(!edge_marked[te[0]] && !edge_marked[te[1]]);
                triangles.push(*tri);
                continue;
            }
            let m = midpoint(te[2], &mut vertices);
            let (c0, c1) = bisect(tri, m);
            // Child 0 has the parent's edge 1 as refinement edge, child 1 edge 0.
            for (child, parent_edge) in [(c0, te[1]), (c1, te[0])] {
                if edge_marked[parent_edge] {
                    let mm = midpoint(parent_edge, &mut vertices);
                    let (g0, g1) = bisect(&child, mm);
                    triangles.push(g0);
                    triangles.push(g1);
                } else {
                    triangles.push(child);
                }
            }
        }
        Ok(Mesh::assemble(self.hierarchy.clone(), vertices, triangles))
    }

    /// Merges sibling pairs back into their parents. A newest vertex is removed
    /// only when every triangle around it is a marked leaf child created by
    /// bisecting through it, so the result stays conforming.
    pub fn coarsen(&self, marked: &[usize]) -> Result<Mesh> {
        let mut is_marked = vec![false; self.triangles.len()];
        for &t in marked {
            self.check_triangle(t)?;
            is_marked[t] = true;
        }
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in &tri.vertices {
                incident[v].push(t);
            }
        }
        let key_index: HashMap<TriKey, usize> =
            self.triangles.iter().enumerate().map(|(t, tri)| (tri.key, t)).collect();

        let mut merged_into: Vec<Option<Triangle>> = vec![None; self.triangles.len()];
        let mut removed = vec![false; self.vertices.len()];
        let mut any = false;
        for (v, patch) in incident.iter().enumerate() {
            if !(patch.len() == 2 || patch.len() == 4) {
                continue;
            }
            let removable = patch.iter().all(|&t| {
                let tri = &self.triangles[t];
                is_marked[t]
                    && tri.key.depth > 0
                    && tri.vertices[2] == v
                    && tri
                        .key
                        .sibling()
                        .and_then(|s| key_index.get(&s))
                        .is_some_and(|s| patch.contains(s))
            });
            if !removable {
                continue;
            }
            for &t in patch {
                let tri = &self.triangles[t];
                if tri.key.child_index() == Some(0) {
                    let s = key_index[&tri.key.sibling().unwrap()];
                    let c1 = &self.triangles[s];
                    let parent = Triangle {
                        vertices: [tri.vertices[1], c1.vertices[0], tri.vertices[0]],
                        key: tri.key.parent().unwrap(),
                    };
                    merged_into[t] = Some(parent);
                    merged_into[s] = Some(parent);
                }
            }
            removed[v] = true;
            any = true;
        }
        if !any {
            return Ok(self.clone());
        }

        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (v, p) in self.vertices.iter().enumerate() {
            if !removed[v] {
                remap[v] = vertices.len();
                vertices.push(*p);
            }
        }
        let mut triangles = Vec::with_capacity(self.triangles.len());
        let mut emitted: std::collections::HashSet<TriKey> = std::collections::HashSet::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let out = match merged_into[t] {
                Some(parent) => {
                    if !emitted.insert(parent.key) {
                        continue;
                    }
                    parent
                }
                None => *tri,
            };
            triangles.push(Triangle {
                vertices: out.vertices.map(|v| remap[v]),
                key: out.key,
            });
        }
        Ok(Mesh::assemble(self.hierarchy.clone(), vertices, triangles))
    }

    /// For every triangle of `self`, the index of the triangle of `coarse` containing it.
    pub fn ancestors_in(&self, coarse: &Mesh) -> Result<Vec<usize>> {
        if !self.same_hierarchy(coarse) {
            return Err(AmotError::HierarchyMismatch);
        }
        let by_key: HashMap<TriKey, usize> = coarse
            .triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| (tri.key, t))
            .collect();
        self.triangles
            .iter()
            .map(|tri| {
                let mut k = Some(tri.key);
                while let Some(key) = k {
                    if let Some(&t) = by_key.get(&key) {
                        return Ok(t);
                    }
                    k = key.parent();
                }
                Err(AmotError::HierarchyMismatch)
            })
            .collect()
    }

    /// Bisects every triangle once (with closure, which is a no-op here).
    pub fn refine_all(&self) -> Mesh {
        let all: Vec<usize> = (0..self.triangles.len()).collect();
        self.refine(&all).expect("all ids are valid")
    }
}

fn bisect(tri: &Triangle, m: usize) -> (Triangle, Triangle) {
    let [a, b, c] = tri.vertices;
    (
        Triangle {
            vertices: [c, a, m],
            key: tri.key.child(0),
        },
        Triangle {
            vertices: [b, c, m],
            key: tri.key.child(1),
        },
    )
}

/// Corner coordinates of the triangle reached from `root` by following `key`.
fn descend(mut p: [[f64; 2]; 3], key: TriKey) -> [[f64; 2]; 3] {
    for d in 0..key.depth {
        let m = [0.5 * (p[0][0] + p[1][0]), 0.5 * (p[0][1] + p[1][1])];
        p = if (key.path >> d) & 1 == 0 {
            [p[2], p[0], m]
        } else {
            [p[1], p[2], m]
        };
    }
    p
}

/// Inflow/outflow flags of every (triangle, local edge) pair for a velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeClassification {
    /// `inflow[t][i]`: `V . n` at the midpoint of local edge `i` of `t` is negative,
    /// with `n` the outward normal of `t`.
    pub inflow: Vec<[bool; 3]>,
    /// Domain-boundary edge ids on which the boundary triangle sees inflow.
    pub boundary_inflow: Vec<usize>,
    pub interior: Vec<bool>,
}

impl EdgeClassification {
    pub fn is_inflow(&self, side: EdgeSide) -> bool {
        self.inflow[side.triangle][side.local]
    }
}

/// Zero normal velocity counts as outflow.
pub fn classify_edges(mesh: &Mesh, field: &VelocityField) -> EdgeClassification {
    let mut inflow = vec![[false; 3]; mesh.num_triangles()];
    let mut boundary_inflow = Vec::new();
    let mut interior = Vec::with_capacity(mesh.edges.len());
    for (id, e) in mesh.edges.iter().enumerate() {
        let v = field.at(e.midpoint[0], e.midpoint[1]);
        let vn = v[0] * e.normal[0] + v[1] * e.normal[1];
        interior.push(!e.is_boundary());
        if vn < 0.0 {
            inflow[e.left.triangle][e.left.local] = true;
            if e.is_boundary() {
                boundary_inflow.push(id);
            }
        }
        if let Some(r) = e.right {
            if vn > 0.0 {
                inflow[r.triangle][r.local] = true;
            }
        }
    }
    EdgeClassification {
        inflow,
        boundary_inflow,
        interior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force conformity: no vertex lies strictly inside any edge.
    fn no_hanging_vertices(mesh: &Mesh) -> bool {
        mesh.edges().iter().all(|e| {
            let [a, b] = e.vertices.map(|v| mesh.vertices()[v]);
            mesh.vertices().iter().enumerate().all(|(v, p)| {
                if e.vertices.contains(&v) {
                    return true;
                }
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                let dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
                let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                !(cross.abs() < 1e-12 && dot > 1e-12 && dot < len2 - 1e-12)
            })
        })
    }

    #[test]
    fn uniform_counts() {
        let m = Mesh::uniform(64).unwrap();
        assert_eq!(m.num_triangles(), 8192);
        assert_eq!(m.num_dofs(), 24576);
        let m1 = Mesh::uniform(1).unwrap();
        assert_eq!(m1.num_triangles(), 2);
        assert!((m1.total_area() - 4.0).abs() < 1e-14);
        let m2 = Mesh::uniform(2).unwrap();
        assert_eq!(m2.num_triangles(), 8);
        assert_eq!(m2.num_vertices(), 9);
        assert!(Mesh::uniform(0).is_err());
        for m in [&m1, &m2] {
            m.check_invariants().unwrap();
            assert!(m.triangles().iter().all(|t| t.key.generation() == 0));
        }
    }

    #[test]
    fn refinement_edge_is_longest_on_initial_mesh() {
        let m = Mesh::uniform(3).unwrap();
        for t in 0..m.num_triangles() {
            let e = m.edges()[m.triangle_edges(t)[2]].length;
            assert!((e - m.geometry(t).diameter).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_counts_and_normals() {
        let m = Mesh::uniform(2).unwrap();
        // 8 triangles: 16 edges, 8 of them on the boundary.
        assert_eq!(m.edges().len(), 16);
        assert_eq!(m.edges().iter().filter(|e| e.is_boundary()).count(), 8);
        for e in m.edges() {
            let c = m.geometry(e.left.triangle).centroid;
            let d = [e.midpoint[0] - c[0], e.midpoint[1] - c[1]];
            assert!(d[0] * e.normal[0] + d[1] * e.normal[1] > 0.0);
            assert!((e.normal[0].hypot(e.normal[1]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn barycentric_gradients() {
        let m = Mesh::uniform(2).unwrap();
        for t in 0..m.num_triangles() {
            let g = m.geometry(t);
            for (j, p) in m.corners(t).iter().enumerate() {
                let l = g.barycentric(*p);
                for (i, li) in l.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((li - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn refine_empty_is_identity() {
        let m = Mesh::uniform(3).unwrap();
        let r = m.refine(&[]).unwrap();
        assert!(r.same_partition(&m));
        assert_eq!(r.vertices(), m.vertices());
    }

    #[test]
    fn refine_single_triangle_closure() {
        let m = Mesh::uniform(4).unwrap();
        // an interior cell's lower triangle
        let t = 2 * (4 + 1);
        let r = m.refine(&[t]).unwrap();
        assert_eq!(r.num_triangles(), m.num_triangles() + 2);
        assert!(no_hanging_vertices(&r));
        r.check_invariants().unwrap();
        let refined: Vec<_> = r.triangles().iter().filter(|t| t.key.generation() == 1).collect();
        assert_eq!(refined.len(), 4);
        let roots: std::collections::BTreeSet<u32> = refined.iter().map(|t| t.key.root_index()).collect();
        assert_eq!(roots, [t as u32, t as u32 + 1].into_iter().collect());
    }

    #[test]
    fn refine_all_on_single_square() {
        let m = Mesh::uniform(1).unwrap();
        let r = m.refine(&[0, 1]).unwrap();
        assert_eq!(r.num_triangles(), 4);
        assert!(r.triangles().iter().all(|t| t.key.generation() == 1));
        assert!((r.total_area() - 4.0).abs() < 1e-14);
        r.check_invariants().unwrap();

        let c = r.coarsen(&[0, 1, 2, 3]).unwrap();
        assert!(c.same_partition(&m));
        assert_eq!(c.num_vertices(), 4);
    }

    #[test]
    fn coarsen_requires_both_siblings() {
        let m = Mesh::uniform(1).unwrap();
        let r = m.refine_all();
        let c = r.coarsen(&[0]).unwrap();
        assert!(c.same_partition(&r));
        assert!(r.coarsen(&[]).unwrap().same_partition(&r));
    }

    #[test]
    fn coarsen_never_below_initial_mesh() {
        let m = Mesh::uniform(2).unwrap();
        let all: Vec<usize> = (0..m.num_triangles()).collect();
        assert!(m.coarsen(&all).unwrap().same_partition(&m));
    }

    #[test]
    fn repeated_local_refinement_stays_conforming() {
        let mut m = Mesh::uniform(2).unwrap();
        for _ in 0..8 {
            // refine the triangle containing the point (0.1, 0.2)
            let t = (0..m.num_triangles())
                .find(|&t| m.geometry(t).barycentric([0.1, 0.2]).iter().all(|&l| l >= 0.0))
                .unwrap();
            m = m.refine(&[t]).unwrap();
            m.check_invariants().unwrap();
            assert!(no_hanging_vertices(&m));
        }
        assert!(m.max_generation() >= 8);
    }

    #[test]
    fn trikey_relations() {
        let r = TriKey::root(7);
        let a = r.child(1).child(0).child(1);
        assert_eq!(a.generation(), 3);
        assert_eq!(a.parent().unwrap().parent().unwrap(), r.child(1));
        assert_eq!(a.child_index(), Some(1));
        assert_eq!(a.sibling().unwrap(), r.child(1).child(0).child(0));
        assert!(r.contains(a));
        assert!(r.child(1).contains(a));
        assert!(!r.child(0).contains(a));
        assert!(a.contains(a));
        assert!(!a.contains(r));
        assert!(!TriKey::root(6).contains(a));
        assert_eq!(r.parent(), None);
    }

    #[test]
    fn classify_zero_field() {
        let m = Mesh::uniform(3).unwrap();
        let c = classify_edges(&m, &VelocityField::zero());
        assert!(c.inflow.iter().all(|f| f.iter().all(|&b| !b)));
        assert!(c.boundary_inflow.is_empty());
    }

    #[test]
    fn classify_expanding_boundary_is_outflow() {
        let m = Mesh::uniform(4).unwrap();
        let v = VelocityField::expanding();
        let c = classify_edges(&m, &v);
        assert!(c.boundary_inflow.is_empty());
        for e in m.edges().iter().filter(|e| e.is_boundary()) {
            let w = v.at(e.midpoint[0], e.midpoint[1]);
            assert!(w[0] * e.normal[0] + w[1] * e.normal[1] > 0.0);
        }
    }

    #[test]
    fn classify_sheering_top_boundary() {
        let m = Mesh::uniform(4).unwrap();
        let c = classify_edges(&m, &VelocityField::sheering());
        for (id, e) in m.edges().iter().enumerate() {
            if !e.is_boundary() || (e.midpoint[1] - 1.0).abs() > 1e-12 {
                continue;
            }
            let inflow = c.boundary_inflow.contains(&id);
            assert_eq!(inflow, e.midpoint[0] > 0.0, "edge at x={}", e.midpoint[0]);
            assert_eq!(c.inflow[e.left.triangle][e.left.local], inflow);
        }
    }

    #[test]
    fn classify_interior_edges_are_antisymmetric() {
        let m = Mesh::uniform(4).unwrap().refine(&[3, 9, 17]).unwrap();
        let c = classify_edges(&m, &VelocityField::custom([0.3, -0.2], [[1.0, 2.0], [-0.5, 0.7]]));
        for e in m.edges() {
            if let Some(r) = e.right {
                let l = c.is_inflow(e.left);
                let rr = c.is_inflow(r);
                assert!(!(l && rr));
            }
        }
    }
}
