//! Startup self-tests behind `amot-ac validate`.

use std::fmt;
use std::sync::Arc;

use crate::dgspace::{mass_matrix, DgFunction};
use crate::error::{AmotError, Result};
use crate::mesh::Mesh;
use crate::quadrature::{TriangleRule, EDGE_GAUSS3, TRIANGLE_DEG4, TRIANGLE_DEG6};
use crate::ros3p::{order_conditions, stability_function, step, Ros3pTableau, ORDER_TOL};
use crate::sipg::{assemble_stiffness, ModelParams, SpatialOperator};
use crate::sparse::{prepare, SolverOptions};
use crate::velocity::VelocityField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Reported value without a pass/fail gate.
    Note,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Note => "NOTE",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn gate(name: &'static str, ok: bool, detail: String) -> CheckLine {
    CheckLine {
        name,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Largest error over monomials `x^a y^b`, `a + b <= degree`, on the reference triangle.
fn triangle_rule_error(rule: &TriangleRule) -> f64 {
    let d = rule.degree as u32;
    let mut worst: f64 = 0.0;
    for a in 0..=d {
        for b in 0..=(d - a) {
            let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
            let q: f64 = rule
                .iter()
                .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                .sum();
            worst = worst.max((q - exact).abs());
        }
    }
    worst
}

/// Runs the self-tests; the caller decides how to report failures.
pub fn self_check() -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let tableau = Ros3pTableau::ros3p();

    let report = order_conditions(&tableau);
    lines.push(gate(
        "rosenbrock order conditions",
        report.passed(),
        format!("max residual {:.2e} (limit {ORDER_TOL:.0e})", report.max_residual()),
    ));
    let r_inf = stability_function(&tableau, -1e8)?;
    lines.push(CheckLine {
        name: "stability at z = -1e8",
        status: CheckStatus::Note,
        detail: format!("R = {r_inf:.6}"),
    });

    let q4 = triangle_rule_error(&TRIANGLE_DEG4);
    let q6 = triangle_rule_error(&TRIANGLE_DEG6);
    let edge: f64 = (0..=5)
        .map(|k| {
            let q: f64 = EDGE_GAUSS3.iter().map(|(s, w)| w * s.powi(k)).sum();
            (q - 1.0 / f64::from(k as u32 + 1)).abs()
        })
        .fold(0.0, f64::max);
    lines.push(gate(
        "quadrature exactness",
        q4.max(q6).max(edge) <= 1e-14,
        format!("triangle deg 4 {q4:.1e}, deg 6 {q6:.1e}, edge deg 5 {edge:.1e}"),
    ));

    let base = Mesh::uniform(4)?;
    let refined = base.refine(&[5])?.refine(&[0, 7, 11])?;
    let coarse = refined.coarsen(&(0..refined.num_triangles()).collect::<Vec<_>>())?;
    let mesh_ok = refined.check_invariants().and(coarse.check_invariants());
    lines.push(gate(
        "mesh refine/coarsen invariants",
        mesh_ok.is_ok(),
        match mesh_ok {
            Ok(()) => format!(
                "{} -> {} -> {} triangles",
                base.num_triangles(),
                refined.num_triangles(),
                coarse.num_triangles()
            ),
            Err(e) => e,
        },
    ));

    let mesh = Arc::new(refined);
    let params = ModelParams::default();
    let one = DgFunction::constant(mesh.clone(), 1.0);
    let mass: f64 = mass_matrix(&mesh).matvec(one.coeffs())?.iter().sum();
    lines.push(gate("mass of unity", (mass - 4.0).abs() < 1e-12, format!("{mass}")));

    let a = assemble_stiffness(&mesh, &params, &VelocityField::zero());
    let a1 = a.matvec(one.coeffs())?.iter().fold(0.0f64, |m, v| m.max(v.abs())) / a.max_abs();
    let asym = a.asymmetry() / a.max_abs();
    lines.push(gate(
        "sipg symmetry and constant kernel",
        asym <= 1e-12 && a1 <= 1e-11,
        format!("asymmetry {asym:.1e}, |A 1| {a1:.1e}"),
    ));

    let field = VelocityField::expanding();
    let op = SpatialOperator::new(mesh.clone(), &params, &field);
    let stage = op.stiffness.add_block_diagonal(
        &(0..mesh.num_triangles())
            .map(|t| {
                let mut b = *op.mass.block(t, t).expect("diagonal mass block");
                for row in b.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= 1e3;
                    }
                }
                b
            })
            .collect::<Vec<_>>(),
    );
    let rhs: Vec<f64> = (0..stage.dim())
        .map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5)
        .collect();
    let opts = SolverOptions::default();
    let sol = prepare(&stage, &opts)?.solve(&rhs, &opts)?;
    let res = stage.matvec(&sol.x)?;
    let rel = res.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        / rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    lines.push(gate(
        "linear solver residual",
        rel <= opts.tol,
        format!("{rel:.1e} after {} iterations", sol.iterations),
    ));

    let half = DgFunction::constant(mesh.clone(), 0.5);
    let zero_field = SpatialOperator::new(mesh, &params, &VelocityField::zero());
    let out = step(&tableau, &half, 1e-3, &zero_field, &params, &opts)?;
    let drift = out
        .u3
        .coeffs()
        .iter()
        .chain(out.u2.coeffs())
        .fold(0.0f64, |m, v| m.max((v - 0.5).abs()));
    lines.push(gate(
        "equilibrium step",
        drift <= 1e-12,
        format!("max drift {drift:.1e}"),
    ));

    Ok(lines)
}

/// Runs [`self_check`] and turns any failed gate into an error.
pub fn require_self_check() -> Result<Vec<CheckLine>> {
    let lines = self_check()?;
    if let Some(bad) = lines.iter().find(|l| l.status == CheckStatus::Fail) {
        return Err(AmotError::SelfCheck(bad.to_string()));
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_gates_pass() {
        let lines = require_self_check().unwrap();
        assert!(lines.len() >= 8);
    }
}
