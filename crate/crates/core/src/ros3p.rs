//! The three-stage, order 3(2), L-stable linearly implicit Rosenbrock pair ROS3P.
//!
//! Stages are written in the form that avoids Jacobian products on the
//! right-hand side:
//!
//! ```text
//! (M / (gamma tau) - J) K_i = R(u + sum_j a_ij K_j) + sum_j (c_ij / tau) M K_j
//! u3 = u + sum_i m_i K_i,   u2 = u + sum_i mhat_i K_i
//! ```
//!
//! with `J = dR/du` frozen at the step's initial value.

use crate::dgspace::DgFunction;
use crate::error::{AmotError, Result};
use crate::sipg::{assemble_nonlinear, nonlinear_jacobian_blocks, ModelParams, SpatialOperator};
use crate::sparse::{prepare, Block, SolverOptions};

/// Order-condition residuals above this reject a tableau.
pub const ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ros3pTableau {
    pub gamma: f64,
    /// Strictly lower triangular.
    pub a: [[f64; 3]; 3],
    /// Strictly lower triangular.
    pub c: [[f64; 3]; 3],
    /// Third-order weights.
    pub m: [f64; 3],
    /// Embedded second-order weights.
    pub mhat: [f64; 3],
}

impl Ros3pTableau {
    pub const fn ros3p() -> Self {
        Ros3pTableau {
            gamma: 7.886_751_345_948_128_822_5e-1,
            a: [
                [0.0, 0.0, 0.0],
                [1.267_949_192_431_122_706_5, 0.0, 0.0],
                [1.267_949_192_431_122_706_5, 0.0, 0.0],
            ],
            c: [
                [0.0, 0.0, 0.0],
                [-1.607_695_154_586_736_238_8, 0.0, 0.0],
                [-3.464_101_615_137_754_587_1, -1.732_050_807_568_877_293_5, 0.0],
            ],
            m: [2.0, 5.773_502_691_896_257_645_1e-1, 4.226_497_308_103_742_354_9e-1],
            mhat: [2.113_248_654_051_871_177_5, 1.0, 4.226_497_308_103_742_354_9e-1],
        }
    }
}

impl Default for Ros3pTableau {
    fn default() -> Self {
        Self::ros3p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCondition {
    pub name: &'static str,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableauReport {
    /// Conditions through order 3 for the main weights.
    pub main: Vec<OrderCondition>,
    /// Conditions through order 2 for the embedded weights.
    pub embedded: Vec<OrderCondition>,
}

impl TableauReport {
    pub fn max_residual(&self) -> f64 {
        self.main
            .iter()
            .chain(&self.embedded)
            .map(|c| c.residual)
            .fold(0.0, |m, r| if r.is_nan() { f64::INFINITY } else { m.max(r) })
    }

    pub fn passed(&self) -> bool {
        self.max_residual() <= ORDER_TOL
    }
}

type Mat3 = [[f64; 3]; 3];

fn lower_inverse(l: &Mat3) -> Mat3 {
    let mut inv = [[0.0; 3]; 3];
    for col in 0..3 {
        for row in col..3 {
            let mut s = if row == col { 1.0 } else { 0.0 };
            for k in col..row {
                s -= l[row][k] * inv[k][col];
            }
            inv[row][col] = s / l[row][row];
        }
    }
    inv
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn row_times(v: &[f64; 3], m: &Mat3) -> [f64; 3] {
    [0, 1, 2].map(|j| (0..3).map(|k| v[k] * m[k][j]).sum())
}

/// Classical Rosenbrock order-condition residuals, evaluated after mapping the
/// tableau back to the `(alpha, Gamma, b)` form.
pub fn order_conditions(t: &Ros3pTableau) -> TableauReport {
    let g = t.gamma;
    if !(g > 0.0 && g.is_finite()) {
        let bad = |name| OrderCondition {
            name,
            residual: f64::INFINITY,
        };
        return TableauReport {
            main: vec![bad("gamma > 0")],
            embedded: vec![bad("gamma > 0")],
        };
    }
    // Gamma^{-1} = diag(1/gamma) - C
    let mut gamma_inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..i {
            gamma_inv[i][j] = -t.c[i][j];
        }
        gamma_inv[i][i] = 1.0 / g;
    }
    let big_gamma = lower_inverse(&gamma_inv);
    let alpha = matmul(&t.a, &big_gamma);
    let alpha_sum: [f64; 3] = [0, 1, 2].map(|i| (0..i).map(|j| alpha[i][j]).sum());
    let beta = |i: usize, j: usize| alpha[i][j] + big_gamma[i][j];
    let beta_sum: [f64; 3] = [0, 1, 2].map(|i| (0..i).map(|j| beta(i, j)).sum());

    let conditions = |b: [f64; 3], order: u8| {
        let mut out = vec![
            OrderCondition {
                name: "sum b = 1",
                residual: (b.iter().sum::<f64>() - 1.0).abs(),
            },
            OrderCondition {
                name: "sum b beta' = 1/2 - gamma",
                residual: ((0..3).map(|i| b[i] * beta_sum[i]).sum::<f64>() - (0.5 - g)).abs(),
            },
        ];
        if order >= 3 {
            out.push(OrderCondition {
                name: "sum b alpha^2 = 1/3",
                residual: ((0..3).map(|i| b[i] * alpha_sum[i].powi(2)).sum::<f64>() - 1.0 / 3.0).abs(),
            });
            let s: f64 = (0..3)
                .map(|i| b[i] * (0..i).map(|j| beta(i, j) * beta_sum[j]).sum::<f64>())
                .sum();
            out.push(OrderCondition {
                name: "sum b beta beta' = 1/6 - gamma + gamma^2",
                residual: (s - (1.0 / 6.0 - g + g * g)).abs(),
            });
        }
        out
    };
    TableauReport {
        main: conditions(row_times(&t.m, &big_gamma), 3),
        embedded: conditions(row_times(&t.mhat, &big_gamma), 2),
    }
}

/// Rejects any tableau whose order conditions are not met to [`ORDER_TOL`].
pub fn validate_tableau(t: &Ros3pTableau) -> Result<TableauReport> {
    let report = order_conditions(t);
    if report.passed() {
        Ok(report)
    } else {
        let worst = report
            .main
            .iter()
            .chain(&report.embedded)
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
            .expect("non-empty");
        Err(AmotError::InvalidTableau(format!(
            "condition '{}' has residual {:.3e}",
            worst.name, worst.residual
        )))
    }
}

/// Amplification factor of one third-order step applied to `u' = lambda u`, `z = tau lambda`.
pub fn stability_function(t: &Ros3pTableau, z: f64) -> Result<f64> {
    let denom = 1.0 / t.gamma - z;
    if denom == 0.0 || !denom.is_finite() {
        return Err(AmotError::InvalidArgument(format!(
            "z = {z} is a pole of the stability function"
        )));
    }
    let mut k = [0.0; 3];
    for i in 0..3 {
        let mut rhs = z;
        for j in 0..i {
            rhs += z * t.a[i][j] * k[j] + t.c[i][j] * k[j];
        }
        k[i] = rhs / denom;
    }
    Ok(1.0 + (0..3).map(|i| t.m[i] * k[i]).sum::<f64>())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Stage-matrix factorizations/preconditioner builds.
    pub preparations: usize,
    pub solves: usize,
    pub iterations: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, o: Self) {
        self.preparations += o.preparations;
        self.solves += o.solves;
        self.iterations += o.iterations;
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u3: DgFunction,
    pub u2: DgFunction,
    pub stages: [Vec<f64>; 3],
    pub stats: StepStats,
}

/// One ROS3P step of size `tau` from `u_prev` on `op`'s mesh.
pub fn step(
    tableau: &Ros3pTableau,
    u_prev: &DgFunction,
    tau: f64,
    op: &SpatialOperator,
    params: &ModelParams,
    solver: &SolverOptions,
) -> Result<StepOutput> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(AmotError::InvalidArgument(format!(
            "step size must be positive, got {tau}"
        )));
    }
    if !crate::dgspace::same_mesh(u_prev.mesh(), &op.mesh) {
        return Err(AmotError::MeshMismatch);
    }
    let n = u_prev.coeffs().len();
    let mesh = op.mesh.clone();
    let inv_gt = 1.0 / (tableau.gamma * tau);

    let jac = nonlinear_jacobian_blocks(u_prev, params);
    let extra: Vec<Block> = jac
        .iter()
        .enumerate()
        .map(|(t, nb)| {
            let mb = op.mass.block(t, t).copied().unwrap_or_default();
            let mut b = *nb;
            for i in 0..3 {
                for j in 0..3 {
                    b[i][j] += inv_gt * mb[i][j];
                }
            }
            b
        })
        .collect();
    let stage_matrix = op.stiffness.add_block_diagonal(&extra);
    let prepared = prepare(&stage_matrix, solver)?;
    let mut stats = StepStats {
        preparations: 1,
        ..StepStats::default()
    };

    let mut stages: [Vec<f64>; 3] = Default::default();
    let mut residuals: Vec<([f64; 3], Vec<f64>)> = Vec::with_capacity(3);
    let mut buf = vec![0.0; n];
    for i in 0..3 {
        let row = tableau.a[i];
        let r = match residuals.iter().find(|(a, _)| *a == row) {
            Some((_, r)) => r.clone(),
            None => {
                let mut z = u_prev.coeffs().to_vec();
                for (j, kj) in stages.iter().enumerate().take(i) {
                    if row[j] != 0.0 {
                        for (zz, kk) in z.iter_mut().zip(kj) {
                            *zz += row[j] * kk;
                        }
                    }
                }
                let z = DgFunction::new(mesh.clone(), z)?;
                op.stiffness.matvec_into(z.coeffs(), &mut buf);
                let b = assemble_nonlinear(&z, params);
                let r: Vec<f64> = buf.iter().zip(&b).map(|(a, b)| -a - b).collect();
                residuals.push((row, r.clone()));
                r
            }
        };
        let mut rhs = r;
        if i > 0 {
            let mut mk = vec![0.0; n];
            for (j, kj) in stages.iter().enumerate().take(i) {
                let cij = tableau.c[i][j] / tau;
                if cij != 0.0 {
                    for (m, k) in mk.iter_mut().zip(kj) {
                        *m += cij * k;
                    }
                }
            }
            op.mass.matvec_into(&mk, &mut buf);
            for (r, m) in rhs.iter_mut().zip(&buf) {
                *r += m;
            }
        }
        let sol = prepared.solve(&rhs, solver)?;
        stats.solves += 1;
        stats.iterations += sol.iterations;
        stages[i] = sol.x;
    }

    let combine = |w: &[f64; 3]| {
        let mut u = u_prev.coeffs().to_vec();
        for (wi, k) in w.iter().zip(&stages) {
            for (uu, kk) in u.iter_mut().zip(k) {
                *uu += wi * kk;
            }
        }
        u
    };
    let u3 = DgFunction::new(mesh.clone(), combine(&tableau.m))?;
    let u2 = DgFunction::new(mesh, combine(&tableau.mhat))?;
    Ok(StepOutput { u3, u2, stages, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ros3p_passes_order_conditions() {
        let report = validate_tableau(&Ros3pTableau::ros3p()).unwrap();
        assert!(report.max_residual() <= ORDER_TOL);
        assert_eq!(report.main.len(), 4);
        assert_eq!(report.embedded.len(), 2);
    }

    #[test]
    fn perturbed_weight_fails() {
        let mut t = Ros3pTableau::ros3p();
        t.m[0] += 1e-3;
        let report = order_conditions(&t);
        assert!(report.main.iter().any(|c| c.residual > 1e-4));
        assert!(validate_tableau(&t).is_err());
    }

    #[test]
    fn zero_gamma_fails() {
        let mut t = Ros3pTableau::ros3p();
        t.gamma = 0.0;
        assert!(matches!(validate_tableau(&t), Err(AmotError::InvalidTableau(_))));
    }

    #[test]
    fn embedded_weights_are_only_second_order() {
        let report = order_conditions(&Ros3pTableau::ros3p());
        let t = Ros3pTableau::ros3p();
        let swapped = Ros3pTableau { m: t.mhat, ..t };
        let s = order_conditions(&swapped);
        assert!(report.passed());
        assert!(s.main[2..].iter().any(|c| c.residual > 1e-3));
    }

    #[test]
    fn stability_function_limits() {
        let t = Ros3pTableau::ros3p();
        assert_eq!(stability_function(&t, 0.0).unwrap(), 1.0);
        // The pair is A-stable with R(-inf) = 1 - sqrt(3), not L-stable.
        let r_inf = stability_function(&t, -1e12).unwrap();
        assert!((r_inf - (1.0 - 3f64.sqrt())).abs() < 1e-9, "{r_inf}");
        assert!(stability_function(&t, 1.0 / t.gamma).is_err());
        for z in [-0.1, -1.0, -10.0, -100.0, -1e4] {
            assert!(stability_function(&t, z).unwrap().abs() <= 1.0);
        }
    }

    #[test]
    fn stability_function_is_third_order() {
        let t = Ros3pTableau::ros3p();
        let err = |z: f64| (stability_function(&t, z).unwrap() - z.exp()).abs();
        let e = [err(-0.04), err(-0.02), err(-0.01)];
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
        }
    }
}
