//! Small dense conic solver.
//!
//! Problems have the standard form
//!
//! ```text
//! minimize    c^T x
//! subject to  A x = b,   x ∈ K_1 × ... × K_p
//! ```
//!
//! where each `K_i` is a free block, a nonnegative orthant, a second-order
//! cone `{(t, v) : ‖v‖ ≤ t}` or a Hermitian PSD cone stored in the packed
//! coordinates of [`crate::linalg::packing`]. The solver is an ADMM operator
//! splitting between the affine set and the cone product; see [`solve`].

mod admm;
mod cones;
mod scaling;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::packing::packed_len;

pub use admm::solve;
pub use cones::{project_nonneg, project_soc};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Free,
    Nonneg,
    /// Second-order cone; the first coordinate is the bound `t`.
    Soc,
    /// Hermitian PSD matrix of the given side length.
    Psd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    /// Number of reals for `Free`/`Nonneg`/`Soc`; matrix side for `Psd`.
    pub dim: usize,
}

impl Block {
    pub fn free(dim: usize) -> Self {
        Self { kind: BlockKind::Free, dim }
    }
    pub fn nonneg(dim: usize) -> Self {
        Self { kind: BlockKind::Nonneg, dim }
    }
    pub fn soc(dim: usize) -> Self {
        Self { kind: BlockKind::Soc, dim }
    }
    pub fn psd(dim: usize) -> Self {
        Self { kind: BlockKind::Psd, dim }
    }

    /// Number of real coordinates the block occupies.
    pub fn len(&self) -> usize {
        match self.kind {
            BlockKind::Psd => packed_len(self.dim),
            _ => self.dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct ConicProblem {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl ConicProblem {
    pub fn new(blocks: Vec<Block>, c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::MalformedProblem("no variable blocks".into()));
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut n = 0;
        for blk in &blocks {
            if blk.dim == 0 {
                return Err(Error::MalformedProblem(format!("{:?} block with zero dimension", blk.kind)));
            }
            offsets.push(n);
            n += blk.len();
        }
        offsets.push(n);
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                what: "objective length",
                expected: n,
                found: c.len(),
            });
        }
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "constraint matrix columns",
                expected: n,
                found: a.ncols(),
            });
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                what: "constraint right-hand side",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if c.iter().chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedProblem("non-finite problem data".into()));
        }
        Ok(Self { blocks, offsets, c, a, b })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_vars(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn objective(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    /// `‖A x − b‖ / (1 + ‖b‖)`.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        (&self.a * x - &self.b).norm() / (1.0 + self.b.norm())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

/// Incremental assembly of a [`ConicProblem`] from sparse rows.
#[derive(Clone, Debug, Default)]
pub struct ProblemBuilder {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    n: usize,
    c: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block and returns the offset of its first coordinate.
    pub fn add_block(&mut self, block: Block) -> usize {
        let off = self.n;
        self.blocks.push(block);
        self.offsets.push(off);
        self.n += block.len();
        self.c.resize(self.n, 0.0);
        off
    }

    pub fn add_objective(&mut self, index: usize, coeff: f64) {
        self.c[index] += coeff;
    }

    /// Adds `Σ coeff·x[index] = rhs`; repeated indices accumulate.
    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push((terms, rhs));
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn build(self) -> Result<ConicProblem> {
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, self.n);
        let mut b = DVector::zeros(m);
        for (r, (terms, rhs)) in self.rows.into_iter().enumerate() {
            for (j, v) in terms {
                if j >= self.n {
                    return Err(Error::MalformedProblem(format!("constraint references variable {j} of {}", self.n)));
                }
                a[(r, j)] += v;
            }
            b[r] = rhs;
        }
        ConicProblem::new(self.blocks, DVector::from_vec(self.c), a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iters: usize,
    /// Over-relaxation parameter in (0, 2).
    pub relaxation: f64,
    /// Initial penalty parameter; adapted during the run when `adaptive_rho`.
    pub rho: f64,
    pub adaptive_rho: bool,
    pub equilibration_passes: usize,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    /// Give up (status `max_iters`) once the best residual score has not
    /// halved for this many iterations; 0 disables the check.
    pub stall_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            max_iters: 20_000,
            relaxation: 1.6,
            rho: 1.0,
            adaptive_rho: true,
            equilibration_passes: 15,
            check_every: 10,
            stall_iters: 2000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        if !(self.rho > 0.0) || self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::InvalidParameter("rho, max_iters and check_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    MaxIters,
    InfeasibleSuspected,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Solved => "solved",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::InfeasibleSuspected => "infeasible_suspected",
        })
    }
}

/// Primal point and cone dual from a previous solve of a problem with the
/// same variable layout.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    /// Dual cone variable `s ∈ K*` (objective units).
    pub s: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub warm: WarmStart,
    offsets: Vec<usize>,
}

impl ConicSolution {
    pub fn block(&self, i: usize) -> &[f64] {
        &self.x[self.offsets[i]..self.offsets[i + 1]]
    }
}

#[cfg(test)]
mod tests;
