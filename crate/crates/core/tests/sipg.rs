//! Properties of the assembled spatial operator.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use amot_core::dgspace::{local_mass, mass_matrix, project, DgFunction};
use amot_core::quadrature::TRIANGLE_DEG6;
use amot_core::sipg::{
    assemble_advection, assemble_diffusion, assemble_jacobian, assemble_nonlinear, assemble_stiffness, f_cubic,
    residual, ModelParams, Reaction,
};
use amot_core::sparse::solve;
use amot_core::velocity::VelocityField;
use common::*;

#[test]
fn diffusion_is_symmetric_and_kills_constants() {
    let p = ModelParams::default();
    for n in [1, 3, 8] {
        let mesh = uniform(n);
        let refined = Arc::new(mesh.refine(&[0, 1]).unwrap());
        for m in [mesh, refined] {
            let a = assemble_stiffness(&m, &p, &VelocityField::zero());
            assert!(a.asymmetry() <= 1e-12 * a.max_abs(), "n={n}");
            let ones = vec![1.0; a.dim()];
            let a1 = a.matvec(&ones).unwrap();
            assert!(a1.iter().all(|v| v.abs() <= 1e-11 * a.max_abs()), "n={n}");
        }
    }
}

#[test]
fn advection_of_constants() {
    // (A_adv 1) . 1 = int div V + int_{inflow boundary} |V.n|; interior jumps of
    // a constant vanish.
    let mesh = uniform(4);
    let a = assemble_advection(&mesh, &VelocityField::expanding());
    let ones = vec![1.0; a.dim()];
    let total: f64 = a.matvec(&ones).unwrap().iter().sum();
    assert!((total - 20.0 * 4.0).abs() < 1e-10, "{total}");
    let s = assemble_advection(&mesh, &VelocityField::sheering());
    // V.n = -100x on y = 1 and 100x on y = -1: inflow on two half sides,
    // each contributing int_0^1 100 x dx = 50.
    let total: f64 = s.matvec(&ones).unwrap().iter().sum();
    assert!((total - 100.0).abs() < 1e-10, "{total}");
}

/// With `u^T A_adv u = 1/2 int div V u^2 + 1/2 sum |V.n| [u]^2 + boundary terms >= 0`,
/// the symmetric part of `A_adv - (div V / 2) M` is positive semidefinite.
#[test]
fn upwind_advection_symmetric_part() {
    let mesh = uniform(2);
    let field = VelocityField::expanding();
    let adv = assemble_advection(&mesh, &field).to_dense();
    assert!(min_sym_eigenvalue(&adv) >= -1e-10, "{}", min_sym_eigenvalue(&adv));
    let mass = mass_matrix(&mesh).to_dense();
    let shifted: Vec<Vec<f64>> = adv
        .iter()
        .zip(&mass)
        .map(|(a, m)| a.iter().zip(m).map(|(x, y)| x - 10.0 * y).collect())
        .collect();
    let lam = min_sym_eigenvalue(&shifted);
    assert!(lam >= -1e-10, "{lam}");
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    // -eps Lap u + u = g with u = cos(pi x) cos(pi y), which satisfies the
    // homogeneous Neumann condition on [-1, 1]^2.
    let eps = 1.0;
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let g = |x: f64, y: f64| (2.0 * eps * PI * PI + 1.0) * exact(x, y);
    let params = ModelParams {
        epsilon: eps,
        ..ModelParams::default()
    };
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [8, 16, 32, 64] {
        let mesh = uniform(n);
        let mass = mass_matrix(&mesh);
        let op = assemble_diffusion(&mesh, &params).add(&mass);
        let rhs = mass.matvec(project(mesh.clone(), g, |_, _| 1).coeffs()).unwrap();
        let u = DgFunction::new(mesh.clone(), solve(&op, &rhs, 1e-12).unwrap()).unwrap();
        hs.push(2.0 / n as f64);
        errs.push(l2_error(&u, exact));
    }
    let order = observed_order(&hs, &errs);
    assert!((1.8..=2.2).contains(&order), "order {order}, errors {errs:?}");
    for w in errs.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn nonlinear_term_matches_degree_six_quadrature() {
    let mut r = rng(7);
    let mesh = Arc::new(uniform(4).refine(&[3, 9, 17]).unwrap());
    let u = random_function(mesh.clone(), &mut r, -0.5, 1.5);
    let p = ModelParams::default();
    let b = assemble_nonlinear(&u, &p);
    for t in 0..mesh.num_triangles() {
        let area = mesh.geometry(t).area;
        let c = u.local(t);
        let mut oracle = [0.0; 3];
        for (l, w) in TRIANGLE_DEG6.iter() {
            let uq = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
            let f = f_cubic(uq).0 / p.epsilon;
            for i in 0..3 {
                oracle[i] += 2.0 * area * w * f * l[i];
            }
        }
        for i in 0..3 {
            let scale = oracle[i].abs().max(area / p.epsilon);
            assert!((b[3 * t + i] - oracle[i]).abs() <= 1e-13 * scale, "t={t}");
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut r = rng(42);
    let mesh = Arc::new(uniform(8).refine(&[10, 11, 40]).unwrap());
    let p = ModelParams::default();
    let a = assemble_stiffness(&mesh, &p, &VelocityField::expanding());
    let u = random_function(mesh.clone(), &mut r, -0.2, 1.2);
    let jac = assemble_jacobian(&u, &a, &p);
    let r0 = residual(&u, &a, &p).unwrap();
    let h = 1e-6;
    for _ in 0..3 {
        let dir = random_vector(mesh.num_dofs(), &mut r);
        let shifted: Vec<f64> = u.coeffs().iter().zip(&dir).map(|(x, d)| x + h * d).collect();
        let r1 = residual(&DgFunction::new(mesh.clone(), shifted).unwrap(), &a, &p).unwrap();
        let fd: Vec<f64> = r1.iter().zip(&r0).map(|(x, y)| (x - y) / h).collect();
        let jd = jac.matvec(&dir).unwrap();
        let rel = diff_norm(&fd, &jd) / norm(&jd);
        assert!(rel <= 1e-5, "relative error {rel}");
    }
}

#[test]
fn linear_reaction_jacobian_is_scaled_mass() {
    let mesh = uniform(3);
    let p = ModelParams {
        reaction: Reaction::Linear(-3.0),
        ..ModelParams::default()
    };
    let zero = assemble_stiffness(&mesh, &p, &VelocityField::zero());
    let u = DgFunction::constant(mesh.clone(), 2.0);
    let jac = assemble_jacobian(&u, &zero, &p);
    for t in 0..mesh.num_triangles() {
        let m = local_mass(mesh.geometry(t).area);
        let a = zero.block(t, t).unwrap();
        let j = jac.block(t, t).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert!((j[i][k] + a[i][k] - 3.0 * m[i][k]).abs() < 1e-12);
            }
        }
    }
}
