#![allow(dead_code)]

use std::sync::Arc;

use amot_core::dgspace::DgFunction;
use amot_core::mesh::Mesh;
use amot_core::quadrature::TRIANGLE_DEG6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::uniform(n).unwrap())
}

pub fn random_function(mesh: Arc<Mesh>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> DgFunction {
    let c = (0..mesh.num_dofs()).map(|_| rng.gen_range(lo..hi)).collect();
    DgFunction::new(mesh, c).unwrap()
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `||u_h - f||_{L2}` with the degree-6 rule on every triangle.
pub fn l2_error(u: &DgFunction, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mesh = u.mesh();
    let mut sum = 0.0;
    for t in 0..mesh.num_triangles() {
        let p = mesh.corners(t);
        let area = mesh.geometry(t).area;
        let c = u.local(t);
        for (l, w) in TRIANGLE_DEG6.iter() {
            let x = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
            let y = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
            let uh = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
            sum += 2.0 * area * w * (uh - f(x, y)).powi(2);
        }
    }
    sum.sqrt()
}

/// Least-squares slope of `log e` against `log h`.
pub fn observed_order(h: &[f64], e: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Smallest eigenvalue of the symmetric part of a dense matrix.
pub fn min_sym_eigenvalue(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (rows[i][j] + rows[j][i]));
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}
