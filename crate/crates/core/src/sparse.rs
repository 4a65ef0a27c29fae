//! Block compressed-sparse-row matrices with dense 3x3 blocks, and solvers
//! for them: a sparse LU factorization and block-Jacobi preconditioned
//! BiCGSTAB.
//!
//! One block row per triangle; the stage matrices are nonsymmetric, so the
//! Krylov method has to be too.

use std::fmt;

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;

use crate::error::{AmotError, Result};

pub type Block = [[f64; 3]; 3];

pub const ZERO_BLOCK: Block = [[0.0; 3]; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCsr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    blocks: Vec<Block>,
}

impl BlockCsr {
    pub fn block_diagonal(blocks: Vec<Block>) -> Self {
        let n = blocks.len();
        BlockCsr {
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            blocks,
        }
    }

    pub fn identity(block_rows: usize) -> Self {
        let mut id = ZERO_BLOCK;
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::block_diagonal(vec![id; block_rows])
    }

    pub fn block_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Scalar dimension (three times the block count).
    pub fn dim(&self) -> usize {
        3 * self.block_rows()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, &Block)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(&self.blocks[span])
    }

    pub fn block(&self, r: usize, c: usize) -> Option<&Block> {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, b)| b)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(AmotError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.chunks_exact_mut(3).enumerate() {
            let mut acc = [0.0; 3];
            for (c, b) in self.row(r) {
                let xc = &x[3 * c..3 * c + 3];
                for i in 0..3 {
                    acc[i] += b[i][0] * xc[0] + b[i][1] * xc[1] + b[i][2] * xc[2];
                }
            }
            yr.copy_from_slice(&acc);
        }
    }

    /// `self + diag(extra)`, inserting diagonal blocks where the pattern lacks them.
    pub fn add_block_diagonal(&self, extra: &[Block]) -> BlockCsr {
        assert_eq!(extra.len(), self.block_rows());
        let mut builder = BlockBuilder::new(self.block_rows());
        for r in 0..self.block_rows() {
            for (c, b) in self.row(r) {
                builder.add(r, c, b);
            }
            builder.add(r, r, &extra[r]);
        }
        builder.finish()
    }

    pub fn scaled(&self, s: f64) -> BlockCsr {
        BlockCsr {
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            blocks: self.blocks.iter().map(|b| b.map(|row| row.map(|v| v * s))).collect(),
        }
    }

    /// Sum of two operators of the same dimension.
    pub fn add(&self, other: &BlockCsr) -> BlockCsr {
        assert_eq!(self.block_rows(), other.block_rows());
        let mut builder = BlockBuilder::new(self.block_rows());
        for m in [self, other] {
            for r in 0..m.block_rows() {
                for (c, b) in m.row(r) {
                    builder.add(r, c, b);
                }
            }
        }
        builder.finish()
    }

    pub fn transpose(&self) -> BlockCsr {
        let mut builder = BlockBuilder::new(self.block_rows());
        for r in 0..self.block_rows() {
            for (c, b) in self.row(r) {
                let mut t = ZERO_BLOCK;
                for i in 0..3 {
                    for j in 0..3 {
                        t[j][i] = b[i][j];
                    }
                }
                builder.add(c, r, &t);
            }
        }
        builder.finish()
    }

    /// Largest absolute entry of `self - self^T`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for r in 0..self.block_rows() {
            for (c, b) in self.row(r) {
                let bt = t.block(r, c).copied().unwrap_or(ZERO_BLOCK);
                for i in 0..3 {
                    for j in 0..3 {
                        worst = worst.max((b[i][j] - bt[i][j]).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter().flatten())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for r in 0..self.block_rows() {
            for (c, b) in self.row(r) {
                for i in 0..3 {
                    for j in 0..3 {
                        d[3 * r + i][3 * c + j] = b[i][j];
                    }
                }
            }
        }
        d
    }
}

/// Accumulates blocks row by row; duplicate positions are summed.
#[derive(Debug, Clone)]
pub struct BlockBuilder {
    rows: Vec<Vec<(usize, Block)>>,
}

impl BlockBuilder {
    pub fn new(block_rows: usize) -> Self {
        BlockBuilder {
            rows: vec![Vec::new(); block_rows],
        }
    }

    pub fn add(&mut self, r: usize, c: usize, b: &Block) {
        let row = &mut self.rows[r];
        let slot = match row.iter().position(|(cc, _)| *cc == c) {
            Some(i) => &mut row[i].1,
            None => {
                row.push((c, ZERO_BLOCK));
                &mut row.last_mut().unwrap().1
            }
        };
        for i in 0..3 {
            for j in 0..3 {
                slot[i][j] += b[i][j];
            }
        }
    }

    pub fn finish(self) -> BlockCsr {
        let mut row_ptr = Vec::with_capacity(self.rows.len() + 1);
        let mut cols = Vec::new();
        let mut blocks = Vec::new();
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, b) in row {
                if b.iter().flatten().any(|&v| v != 0.0) {
                    cols.push(c);
                    blocks.push(b);
                }
            }
            row_ptr.push(cols.len());
        }
        BlockCsr { row_ptr, cols, blocks }
    }
}

pub fn invert_block(b: &Block) -> Option<Block> {
    let c00 = b[1][1] * b[2][2] - b[1][2] * b[2][1];
    let c01 = b[1][2] * b[2][0] - b[1][0] * b[2][2];
    let c02 = b[1][0] * b[2][1] - b[1][1] * b[2][0];
    let det = b[0][0] * c00 + b[0][1] * c01 + b[0][2] * c02;
    let scale = b.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !det.is_finite() || scale == 0.0 || det.abs() <= 1e-14 * scale.powi(3) {
        return None;
    }
    let inv_det = 1.0 / det;
    Some([
        [
            c00 * inv_det,
            (b[0][2] * b[2][1] - b[0][1] * b[2][2]) * inv_det,
            (b[0][1] * b[1][2] - b[0][2] * b[1][1]) * inv_det,
        ],
        [
            c01 * inv_det,
            (b[0][0] * b[2][2] - b[0][2] * b[2][0]) * inv_det,
            (b[0][2] * b[1][0] - b[0][0] * b[1][2]) * inv_det,
        ],
        [
            c02 * inv_det,
            (b[0][1] * b[2][0] - b[0][0] * b[2][1]) * inv_det,
            (b[0][0] * b[1][1] - b[0][1] * b[1][0]) * inv_det,
        ],
    ])
}

#[inline]
pub(crate) fn apply_block(b: &Block, x: &[f64], y: &mut [f64]) {
    for i in 0..3 {
        y[i] = b[i][0] * x[0] + b[i][1] * x[1] + b[i][2] * x[2];
    }
}

/// How [`prepare`] readies an operator for repeated solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Sparse LU with fill-reducing ordering and partial pivoting; each
    /// solve is followed by iterative refinement until the residual target
    /// is met.
    #[default]
    SparseLu,
    /// Right-preconditioned BiCGSTAB with inverted 3x3 diagonal blocks.
    Bicgstab,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `||A x - b|| <= tol ||b||`.
    pub tol: f64,
    /// Krylov iterations, or refinement sweeps for the direct method.
    pub max_iter: usize,
    pub method: SolverMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 2000,
            method: SolverMethod::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual recomputed from the returned `x`.
    pub residual: f64,
}

enum Factor {
    Jacobi(Vec<Block>),
    Lu(Box<Lu<usize, f64>>),
}

/// An operator readied for repeated solves: factored, or with its
/// preconditioner built.
pub struct Prepared<'a> {
    op: &'a BlockCsr,
    factor: Factor,
}

impl fmt::Debug for Prepared<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let method = match self.factor {
            Factor::Jacobi(_) => SolverMethod::Bicgstab,
            Factor::Lu(_) => SolverMethod::SparseLu,
        };
        f.debug_struct("Prepared")
            .field("dim", &self.op.dim())
            .field("method", &method)
            .finish()
    }
}

pub fn prepare<'a>(op: &'a BlockCsr, opts: &SolverOptions) -> Result<Prepared<'a>> {
    let factor = match opts.method {
        SolverMethod::Bicgstab => Factor::Jacobi(
            (0..op.block_rows())
                .map(|r| op.block(r, r).and_then(invert_block).ok_or(AmotError::SingularBlock(r)))
                .collect::<Result<Vec<_>>>()?,
        ),
        SolverMethod::SparseLu => Factor::Lu(Box::new(factor_lu(op)?)),
    };
    Ok(Prepared { op, factor })
}

fn factor_lu(op: &BlockCsr) -> Result<Lu<usize, f64>> {
    let failure = |reason| AmotError::SolverFailure {
        reason,
        iterations: 0,
        residual: f64::NAN,
    };
    if op.dim() == 0 {
        return Err(AmotError::InvalidArgument("empty operator".into()));
    }
    let mut entries = Vec::with_capacity(9 * op.num_blocks());
    for r in 0..op.block_rows() {
        for (c, b) in op.row(r) {
            for (i, row) in b.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    entries.push(Triplet::new(3 * r + i, 3 * c + j, v));
                }
            }
        }
    }
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(op.dim(), op.dim(), &entries)
        .map_err(|_| failure("sparse matrix assembly"))?;
    m.sp_lu().map_err(|_| failure("lu factorization"))
}

/// One-shot solve at relative tolerance `tol`.
pub fn solve(op: &BlockCsr, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    Ok(prepare(op, &opts)?.solve(rhs, &opts)?.x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Prepared<'_> {
    pub fn operator(&self) -> &BlockCsr {
        self.op
    }

    fn precondition(inv_diag: &[Block], x: &[f64], y: &mut [f64]) {
        for ((inv, xs), ys) in inv_diag.iter().zip(x.chunks_exact(3)).zip(y.chunks_exact_mut(3)) {
            apply_block(inv, xs, ys);
        }
    }

    fn true_residual(&self, x: &[f64], rhs: &[f64], r: &mut [f64]) -> f64 {
        self.op.matvec_into(x, r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        norm(r)
    }

    /// Solves `A x = rhs`; the returned residual is recomputed from `x`.
    pub fn solve(&self, rhs: &[f64], opts: &SolverOptions) -> Result<Solution> {
        let n = self.op.dim();
        if rhs.len() != n {
            return Err(AmotError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(AmotError::InvalidArgument("non-finite right-hand side".into()));
        }
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(Solution {
                x: vec![0.0; n],
                iterations: 0,
                residual: 0.0,
            });
        }
        match &self.factor {
            Factor::Lu(lu) => self.solve_lu(lu, rhs, bnorm, opts),
            Factor::Jacobi(inv) => self.bicgstab(inv, rhs, bnorm, opts),
        }
    }

    fn solve_lu(&self, lu: &Lu<usize, f64>, rhs: &[f64], bnorm: f64, opts: &SolverOptions) -> Result<Solution> {
        let n = rhs.len();
        let target = opts.tol * bnorm;
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut rnorm = bnorm;
        // One solve plus at most `max_iter` refinement sweeps.
        for sweep in 0..=opts.max_iter {
            let dx = lu.solve(Col::<f64>::from_fn(n, |i| r[i]));
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += dx[i];
            }
            let previous = rnorm;
            rnorm = self.true_residual(&x, rhs, &mut r);
            if !rnorm.is_finite() {
                break;
            }
            if rnorm <= target {
                return Ok(Solution {
                    x,
                    iterations: sweep + 1,
                    residual: rnorm / bnorm,
                });
            }
            if rnorm >= previous {
                break;
            }
        }
        Err(AmotError::SolverFailure {
            reason: "lu residual",
            iterations: opts.max_iter,
            residual: rnorm / bnorm,
        })
    }

    /// Right-preconditioned BiCGSTAB from a zero initial guess.
    fn bicgstab(&self, inv_diag: &[Block], rhs: &[f64], bnorm: f64, opts: &SolverOptions) -> Result<Solution> {
        let n = rhs.len();
        let mut x = vec![0.0; n];
        let target = opts.tol * bnorm;

        let mut r = rhs.to_vec();
        let mut r_hat = r.clone();
        let mut p = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut p_hat = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut s_hat = vec![0.0; n];
        let mut t = vec![0.0; n];
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut restarts = 0;
        let mut rnorm = bnorm;

        for it in 1..=opts.max_iter {
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 || !rho_new.is_finite() {
                if restarts > 5 {
                    return Err(AmotError::SolverFailure {
                        reason: "breakdown (rho)",
                        iterations: it,
                        residual: rnorm / bnorm,
                    });
                }
                restarts += 1;
                r_hat.copy_from_slice(&r);
                p.fill(0.0);
                v.fill(0.0);
                rho = 1.0;
                alpha = 1.0;
                omega = 1.0;
                continue;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            Self::precondition(inv_diag, &p, &mut p_hat);
            self.op.matvec_into(&p_hat, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() {
                return Err(AmotError::SolverFailure {
                    reason: "breakdown (alpha)",
                    iterations: it,
                    residual: rnorm / bnorm,
                });
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) <= target {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                rnorm = self.true_residual(&x, rhs, &mut r);
                if rnorm <= target {
                    return Ok(Solution {
                        x,
                        iterations: it,
                        residual: rnorm / bnorm,
                    });
                }
                r_hat.copy_from_slice(&r);
                p.fill(0.0);
                v.fill(0.0);
                rho = 1.0;
                alpha = 1.0;
                omega = 1.0;
                continue;
            }
            Self::precondition(inv_diag, &s, &mut s_hat);
            self.op.matvec_into(&s_hat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                return Err(AmotError::SolverFailure {
                    reason: "breakdown (omega)",
                    iterations: it,
                    residual: rnorm / bnorm,
                });
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            rnorm = norm(&r);
            if !rnorm.is_finite() {
                return Err(AmotError::SolverFailure {
                    reason: "non-finite residual",
                    iterations: it,
                    residual: f64::NAN,
                });
            }
            if rnorm <= target {
                rnorm = self.true_residual(&x, rhs, &mut r);
                if rnorm <= target {
                    return Ok(Solution {
                        x,
                        iterations: it,
                        residual: rnorm / bnorm,
                    });
                }
                // Recurrence drifted from the true residual; restart from it.
                r_hat.copy_from_slice(&r);
                p.fill(0.0);
                v.fill(0.0);
                rho = 1.0;
                alpha = 1.0;
                omega = 1.0;
            } else if omega == 0.0 {
                return Err(AmotError::SolverFailure {
                    reason: "breakdown (omega)",
                    iterations: it,
                    residual: rnorm / bnorm,
                });
            }
        }
        Err(AmotError::SolverFailure {
            reason: "max iterations",
            iterations: opts.max_iter,
            residual: rnorm / bnorm,
        })
    }
}
