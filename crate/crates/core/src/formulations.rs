//! Conic programs for lifted phase retrieval with a line-spectral prior.
//!
//! Every program shares one set of conventions:
//!
//! * `u` is a free block of `2N − 1` reals (see [`ToeplitzParam::to_reals`]);
//! * `v = V_FLOOR + v'` with `v'` in a one-dimensional nonnegative block;
//! * Hermitian blocks use the packed coordinates of [`crate::linalg::packing`];
//! * complex equalities are split into their packed real rows here, so the
//!   solver only ever sees real data.
//!
//! The data fit is either the equality `L(X) = y` or the epigraph penalty
//! `δ·t`, `t ≥ ‖L(X) − y‖`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::packing::{diag_index, offdiag_index, pack, packed_len, unpack};
use crate::linalg::{psd_project, toeplitz_embed, Complex64, ComplexVector, HermitianMatrix, ToeplitzParam};
use crate::sdp::{solve, Block, ConicProblem, ConicSolution, ProblemBuilder, SolveStatus, SolverOptions, WarmStart};
use crate::signal::{lift_operator, LiftOperator, MeasurementEnsemble};

/// Closed stand-in for the strict inequality `v > 0`.
pub const V_FLOOR: f64 = 1e-8;
pub const DEFAULT_LAMBDA: f64 = 0.1;
/// Slack used when checking PSD-ness of solver output and fixed BMI data.
pub const PSD_TOL: f64 = 1e-6;

/// Amplitude measurements `y` of an unknown signal under a known ensemble.
#[derive(Clone, Debug)]
pub struct PhaseRetrievalInstance {
    ensemble: MeasurementEnsemble,
    y: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl PhaseRetrievalInstance {
    pub fn new(ensemble: MeasurementEnsemble, y: Vec<f64>) -> Result<Self> {
        if y.len() != ensemble.m() {
            return Err(Error::DimensionMismatch {
                what: "measurement count",
                expected: ensemble.m(),
                found: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("amplitudes must be nonnegative, got {bad}")));
        }
        let rows = lift_operator(&ensemble).packed_rows();
        Ok(Self { ensemble, y, rows })
    }

    pub fn n(&self) -> usize {
        self.ensemble.n()
    }

    pub fn m(&self) -> usize {
        self.ensemble.m()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn ensemble(&self) -> &MeasurementEnsemble {
        &self.ensemble
    }

    pub fn lift(&self) -> LiftOperator {
        lift_operator(&self.ensemble)
    }

    /// Same ensemble, different observations.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.ensemble.clone(), y)
    }

    /// `‖L(X) − y‖`.
    pub fn misfit(&self, x: &HermitianMatrix) -> f64 {
        let p = pack(x);
        self.rows
            .iter()
            .zip(&self.y)
            .map(|(r, y)| (dot(r, &p) - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Minimum-Frobenius-norm Hermitian solution of `L(X) = y`.
    pub fn least_norm_solution(&self) -> Result<HermitianMatrix> {
        let n2 = packed_len(self.n());
        let r = DMatrix::from_fn(self.m(), n2, |i, j| self.rows[i][j]);
        let gram = &r * r.transpose();
        let tol = 1e-12 * gram.amax().max(1.0);
        let pinv = gram.pseudo_inverse(tol).map_err(|_| Error::RankDeficient)?;
        let q = pinv * DVector::from_column_slice(&self.y);
        let x = r.transpose() * q;
        Ok(unpack(x.as_slice(), self.n()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationTag {
    Phaselift,
    Bmi,
    Convex,
    ConvexNoisy,
    BmiNoisy,
}

impl std::fmt::Display for FormulationTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormulationTag::Phaselift => "phaselift",
            FormulationTag::Bmi => "bmi",
            FormulationTag::Convex => "convex",
            FormulationTag::ConvexNoisy => "convex_noisy",
            FormulationTag::BmiNoisy => "bmi_noisy",
        })
    }
}

/// How the measurements enter a program.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DataFit {
    Exact,
    /// Objective gains `δ·‖L(X) − y‖` (epigraph form).
    Penalized { delta: f64 },
}

impl DataFit {
    fn validate(self) -> Result<()> {
        match self {
            DataFit::Penalized { delta } if !(delta > 0.0 && delta.is_finite()) => Err(Error::InvalidParameter(
                format!("penalty weight must be positive and finite, got {delta}"),
            )),
            _ => Ok(()),
        }
    }

    fn is_noisy(self) -> bool {
        matches!(self, DataFit::Penalized { .. })
    }
}

/// Estimate returned by every formulation.
#[derive(Clone, Debug)]
pub struct AnmPhaseLiftSolution {
    pub x_hat: HermitianMatrix,
    /// Zero for plain PhaseLift.
    pub u_hat: ToeplitzParam,
    pub v_hat: f64,
    /// Only the convex program carries `w`.
    pub w_hat: Option<ComplexVector>,
    pub objective: f64,
    pub tag: FormulationTag,
    /// Status of the last conic solve.
    pub status: SolveStatus,
    /// Outer iterations of the alternation (0 for single-shot programs).
    pub outer_iterations: usize,
    /// Objective after each BMI half-step, as returned by the solver.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl AnmPhaseLiftSolution {
    /// `λ_min(v T(u) − X)`.
    pub fn bmi_margin(&self) -> Result<f64> {
        toeplitz_embed(&self.u_hat).scale(self.v_hat).sub(&self.x_hat).min_eigenvalue()
    }

    /// `[[v, w^H], [w, T(u) + X]]`, when `w` is present.
    pub fn convex_block(&self) -> Option<HermitianMatrix> {
        let w = self.w_hat.as_ref()?;
        let inner = toeplitz_embed(&self.u_hat).add(&self.x_hat);
        Some(bordered(self.v_hat, w, &inner))
    }
}

/// `[[v, w^H], [w, M]]`.
pub fn bordered(v: f64, w: &ComplexVector, m: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::from_upper(m.dim() + 1, |i, j| match (i, j) {
        (0, 0) => Complex64::new(v, 0.0),
        (0, j) => w[j - 1].conj(),
        (i, j) => m.get(i - 1, j - 1),
    })
}

// ---------------------------------------------------------------------------
// Shared assembly helpers

/// Packed coordinate `p` of `T(u)` as `coeff · u_real[index]`.
fn toeplitz_coord(n: usize) -> Vec<(usize, f64)> {
    let mut out = vec![(0, 0.0); packed_len(n)];
    for i in 0..n {
        out[diag_index(i)] = (0, 1.0);
        for j in (i + 1)..n {
            let (re, im) = offdiag_index(n, i, j);
            let k = j - i;
            out[re] = (2 * k - 1, SQRT_2);
            out[im] = (2 * k, SQRT_2);
        }
    }
    out
}

/// Packed index of `(i, j)` (`i ≤ j`) inside a `d×d` block, real part first.
fn packed_pair(d: usize, i: usize, j: usize) -> (usize, Option<usize>) {
    if i == j {
        (diag_index(i), None)
    } else {
        let (re, im) = offdiag_index(d, i, j);
        (re, Some(im))
    }
}

/// For each packed coordinate `p` of an `n×n` matrix, the matching
/// coordinate of the lower-right `n×n` corner of an `(n+1)×(n+1)` block.
fn corner_coord(n: usize) -> Vec<usize> {
    let mut out = vec![0; packed_len(n)];
    for i in 0..n {
        out[diag_index(i)] = diag_index(i + 1);
        for j in (i + 1)..n {
            let (re, im) = offdiag_index(n, i, j);
            let (bre, bim) = offdiag_index(n + 1, i + 1, j + 1);
            out[re] = bre;
            out[im] = bim;
        }
    }
    out
}

/// Adds the data-fit rows for `X` at `x_off`.
fn add_data_fit(b: &mut ProblemBuilder, inst: &PhaseRetrievalInstance, x_off: usize, fit: DataFit) {
    add_rows_fit(b, &inst.rows, &inst.y, x_off, fit);
}

fn sparse_row(row: &[f64], off: usize, sign: f64) -> Vec<(usize, f64)> {
    row.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| (off + k, sign * v))
        .collect()
}

/// Objective terms `v + tr T(u)/N + λ tr X` (`tr T(u)/N = u0`); the constant
/// `V_FLOOR` is added back by [`objective_of`].
fn add_anm_objective(b: &mut ProblemBuilder, u: usize, v: usize, x: Option<(usize, usize, f64)>) {
    b.add_objective(v, 1.0);
    b.add_objective(u, 1.0);
    if let Some((x_off, n, lambda)) = x {
        for i in 0..n {
            b.add_objective(x_off + diag_index(i), lambda);
        }
    }
}

fn objective_of(p: &ConicProblem, sol: &ConicSolution, has_v: bool) -> f64 {
    p.objective_value(&sol.x) + if has_v { V_FLOOR } else { 0.0 }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("λ must be positive and finite, got {lambda}")))
    }
}

fn tag_for(noisy: bool, exact: FormulationTag, penalized: FormulationTag) -> FormulationTag {
    if noisy {
        penalized
    } else {
        exact
    }
}

// ---------------------------------------------------------------------------
// PhaseLift

/// `min tr X  s.t.  L(X) = y, X ⪰ 0`.
pub fn build_phaselift(inst: &PhaseRetrievalInstance) -> Result<ConicProblem> {
    build_phaselift_with(inst, DataFit::Exact)
}

fn build_phaselift_with(inst: &PhaseRetrievalInstance, fit: DataFit) -> Result<ConicProblem> {
    fit.validate()?;
    let n = inst.n();
    let mut b = ProblemBuilder::new();
    let x = b.add_block(Block::psd(n));
    for i in 0..n {
        b.add_objective(x + diag_index(i), 1.0);
    }
    add_data_fit(&mut b, inst, x, fit);
    b.build()
}

pub fn solve_phaselift(inst: &PhaseRetrievalInstance, opts: &SolverOptions) -> Result<AnmPhaseLiftSolution> {
    solve_phaselift_fit(inst, DataFit::Exact, opts)
}

/// PhaseLift with either data fit; the penalized form
/// `min tr X + δ‖L(X) − y‖` is the noisy-data counterpart used by the
/// experiments. Both carry the `phaselift` tag.
pub fn solve_phaselift_fit(
    inst: &PhaseRetrievalInstance,
    fit: DataFit,
    opts: &SolverOptions,
) -> Result<AnmPhaseLiftSolution> {
    let n = inst.n();
    let p = build_phaselift_with(inst, fit)?;
    let sol = solve(&p, opts, None)?;
    Ok(AnmPhaseLiftSolution {
        x_hat: unpack(sol.block(0), n),
        u_hat: ToeplitzParam::scaled_identity(n, 0.0),
        v_hat: V_FLOOR,
        w_hat: None,
        objective: sol.objective,
        tag: FormulationTag::Phaselift,
        status: sol.status,
        outer_iterations: 0,
        objective_trace: Vec::new(),
        converged: sol.status == SolveStatus::Solved,
    })
}

// ---------------------------------------------------------------------------
// Convex relaxation

/// Blocks: `u` free, `v'` nonneg, `X` psd, `B = [[v, w^H], [w, T(u)+X]]` psd,
/// and the epigraph when penalized.
fn build_convex_with(inst: &PhaseRetrievalInstance, lambda: f64, fit: DataFit) -> Result<ConicProblem> {
    check_lambda(lambda)?;
    fit.validate()?;
    let n = inst.n();
    let mut b = ProblemBuilder::new();
    let u = b.add_block(Block::free(2 * n - 1));
    let v = b.add_block(Block::nonneg(1));
    let x = b.add_block(Block::psd(n));
    let big = b.add_block(Block::psd(n + 1));
    add_anm_objective(&mut b, u, v, Some((x, n, lambda)));

    b.add_equality(vec![(big + diag_index(0), 1.0), (v, -1.0)], V_FLOOR);
    for (p, ((k, coeff), corner)) in toeplitz_coord(n).into_iter().zip(corner_coord(n)).enumerate() {
        b.add_equality(vec![(big + corner, 1.0), (u + k, -coeff), (x + p, -1.0)], 0.0);
    }
    add_data_fit(&mut b, inst, x, fit);
    b.build()
}

/// `min v + tr T(u)/N + λ tr X` s.t. `L(X) = y`, `X ⪰ 0`,
/// `[[v, w^H], [w, T(u) + X]] ⪰ 0`.
pub fn build_anm_convex(inst: &PhaseRetrievalInstance, lambda: f64) -> Result<ConicProblem> {
    build_convex_with(inst, lambda, DataFit::Exact)
}

pub fn solve_convex(
    inst: &PhaseRetrievalInstance,
    lambda: f64,
    fit: DataFit,
    opts: &SolverOptions,
) -> Result<AnmPhaseLiftSolution> {
    let n = inst.n();
    let p = build_convex_with(inst, lambda, fit)?;
    let sol = solve(&p, opts, None)?;
    let big = unpack(sol.block(3), n + 1);
    let w = ComplexVector::new((0..n).map(|i| big.get(i + 1, 0)).collect());
    Ok(AnmPhaseLiftSolution {
        x_hat: unpack(sol.block(2), n),
        u_hat: ToeplitzParam::from_reals(sol.block(0))?,
        v_hat: V_FLOOR + sol.block(1)[0],
        w_hat: Some(w),
        objective: objective_of(&p, &sol, true),
        tag: tag_for(fit.is_noisy(), FormulationTag::Convex, FormulationTag::ConvexNoisy),
        status: sol.status,
        outer_iterations: 0,
        objective_trace: Vec::new(),
        converged: sol.status == SolveStatus::Solved,
    })
}

// ---------------------------------------------------------------------------
// Bilinear program and its alternation

/// The variable held constant in one half-step of the alternation.
#[derive(Clone, Copy, Debug)]
pub enum BmiFixed<'a> {
    U(&'a ToeplitzParam),
    V(f64),
}

/// Blocks: `u` free, `v'` nonneg, `X` psd, `S = v T(u) − X` psd, and the
/// epigraph when penalized. The fixed variable is pinned by equalities so
/// both half-steps share one layout and warm starts carry over.
fn build_bmi_with(inst: &PhaseRetrievalInstance, lambda: f64, fit: DataFit, fixed: BmiFixed<'_>) -> Result<ConicProblem> {
    check_lambda(lambda)?;
    fit.validate()?;
    let n = inst.n();
    let mut b = ProblemBuilder::new();
    let u = b.add_block(Block::free(2 * n - 1));
    let v = b.add_block(Block::nonneg(1));
    let x = b.add_block(Block::psd(n));
    let s = b.add_block(Block::psd(n));
    add_anm_objective(&mut b, u, v, Some((x, n, lambda)));

    let coords = toeplitz_coord(n);
    match fixed {
        BmiFixed::U(uf) => {
            if uf.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "fixed Toeplitz parameter length",
                    expected: n,
                    found: uf.len(),
                });
            }
            let t = toeplitz_embed(uf);
            let eig = t.eigenvalues()?;
            let scale = eig.iter().fold(1.0f64, |a, e| a.max(e.abs()));
            let min = *eig.last().expect("non-empty");
            if min < -PSD_TOL * scale {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
            let ur = uf.to_reals();
            for (k, val) in ur.iter().enumerate() {
                b.add_equality(vec![(u + k, 1.0)], *val);
            }
            // S_p − T_p (V_FLOOR + v') + X_p = 0
            for (p, (k, coeff)) in coords.into_iter().enumerate() {
                let tp = coeff * ur[k];
                b.add_equality(vec![(s + p, 1.0), (v, -tp), (x + p, 1.0)], tp * V_FLOOR);
            }
        }
        BmiFixed::V(vf) => {
            if !(vf >= V_FLOOR && vf.is_finite()) {
                return Err(Error::InvalidParameter(format!("fixed v must be at least {V_FLOOR}, got {vf}")));
            }
            b.add_equality(vec![(v, 1.0)], vf - V_FLOOR);
            for (p, (k, coeff)) in coords.into_iter().enumerate() {
                b.add_equality(vec![(s + p, 1.0), (u + k, -vf * coeff), (x + p, 1.0)], 0.0);
            }
        }
    }
    add_data_fit(&mut b, inst, x, fit);
    b.build()
}

/// One convex half-step of the alternation for `min v + tr T(u)/N + λ tr X`
/// s.t. `L(X) = y`, `X ⪰ 0`, `v ≥ V_FLOOR`, `v T(u) − X ⪰ 0`.
///
/// Rejects a fixed `u` whose `T(u)` is not PSD.
pub fn build_bmi_step(inst: &PhaseRetrievalInstance, lambda: f64, fixed: BmiFixed<'_>) -> Result<ConicProblem> {
    build_bmi_with(inst, lambda, DataFit::Exact, fixed)
}

/// Variant selector for [`build_noisy`].
#[derive(Clone, Copy, Debug)]
pub enum NoisyVariant<'a> {
    BmiStep(BmiFixed<'a>),
    Convex,
}

/// Replaces `L(X) = y` with the objective term `δ‖L(X) − y‖`.
pub fn build_noisy(
    inst: &PhaseRetrievalInstance,
    lambda: f64,
    delta: f64,
    variant: NoisyVariant<'_>,
) -> Result<ConicProblem> {
    let fit = DataFit::Penalized { delta };
    match variant {
        NoisyVariant::BmiStep(fixed) => build_bmi_with(inst, lambda, fit, fixed),
        NoisyVariant::Convex => build_convex_with(inst, lambda, fit),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BmiOptions {
    pub max_outer: usize,
    /// Stop once a full outer iteration changes the objective by less than
    /// this fraction.
    pub rel_tol: f64,
}

impl Default for BmiOptions {
    fn default() -> Self {
        Self {
            max_outer: 20,
            rel_tol: 1e-4,
        }
    }
}

/// Iterate of the alternation.
#[derive(Clone, Debug)]
pub struct BmiPoint {
    pub u: ToeplitzParam,
    pub v: f64,
    pub x: HermitianMatrix,
}

impl BmiPoint {
    /// `u = mean(y)·N·e1`, `v = 1`, `X` = PSD part of the least-norm solution
    /// of `L(X) = y`.
    pub fn initial(inst: &PhaseRetrievalInstance) -> Result<Self> {
        let n = inst.n();
        let mean = inst.y.iter().sum::<f64>() / inst.m() as f64;
        Ok(Self {
            u: ToeplitzParam::scaled_identity(n, mean * n as f64),
            v: 1.0,
            x: psd_project(&inst.least_norm_solution()?)?,
        })
    }

    pub fn objective(&self, lambda: f64, inst: &PhaseRetrievalInstance, fit: DataFit) -> f64 {
        let base = self.v + self.u.u()[0].re + lambda * self.x.trace();
        match fit {
            DataFit::Exact => base,
            DataFit::Penalized { delta } => base + delta * inst.misfit(&self.x),
        }
    }

    /// Whether the point satisfies every constraint of the bilinear program.
    fn is_feasible(&self, inst: &PhaseRetrievalInstance, fit: DataFit) -> Result<bool> {
        let scale = 1.0 + self.x.frobenius_norm();
        if self.v < V_FLOOR || self.x.min_eigenvalue()? < -PSD_TOL * scale {
            return Ok(false);
        }
        let margin = toeplitz_embed(&self.u).scale(self.v).sub(&self.x).min_eigenvalue()?;
        if margin < -PSD_TOL * scale {
            return Ok(false);
        }
        Ok(match fit {
            DataFit::Exact => {
                let ynorm = inst.y.iter().map(|v| v * v).sum::<f64>().sqrt();
                inst.misfit(&self.x) <= PSD_TOL * (1.0 + ynorm)
            }
            DataFit::Penalized { .. } => true,
        })
    }

    /// Layout-compatible primal vector, used to warm-start the first solve.
    fn to_warm(&self, inst: &PhaseRetrievalInstance, fit: DataFit) -> Result<WarmStart> {
        let mut x = self.u.to_reals();
        x.push((self.v - V_FLOOR).max(0.0));
        x.extend(pack(&self.x));
        let slack = toeplitz_embed(&self.u).scale(self.v).sub(&self.x);
        x.extend(pack(&psd_project(&slack)?));
        if fit.is_noisy() {
            push_epigraph(&mut x, inst, &self.x);
        }
        let len = x.len();
        Ok(WarmStart { x, s: vec![0.0; len] })
    }
}

/// Eigenvalues of a fixed `T(u)` below this fraction of `λ_max` are treated
/// as zero when the alternation restricts `X` to the range of `T(u)`.
pub const FACE_TOL: f64 = 1e-6;

/// The "fix `u`" half-step restricted to the face `X = Q Y Q^H`, where `Q`
/// spans the numerically nonzero eigenvectors of `T(u)`.
///
/// `v T(u) − X ⪰ 0` with `X ⪰ 0` forces `range(X) ⊆ range(T(u))`, so on a
/// rank-deficient `T(u)` the full program has no strictly feasible point and
/// splitting methods crawl. In the eigenbasis the constraint reads
/// `v Λ − Y ⪰ 0`. Blocks: `v'` nonneg, `Y` psd `r`, `S = vΛ − Y` psd `r`,
/// epigraph when penalized.
struct FaceStep {
    basis: Vec<ComplexVector>,
    lambdas: Vec<f64>,
    problem: ConicProblem,
    /// `u0` of the fixed Toeplitz parameter (a constant objective term).
    u0: f64,
}

impl FaceStep {
    /// `None` when `T(u)` has full numerical rank (nothing to reduce) or is zero.
    fn build(inst: &PhaseRetrievalInstance, lambda: f64, fit: DataFit, u: &ToeplitzParam) -> Result<Option<Self>> {
        let n = inst.n();
        let eig = toeplitz_embed(u).eigh()?;
        let top = eig.values[0];
        if top <= 0.0 {
            return Ok(None);
        }
        let min = *eig.values.last().expect("non-empty");
        if min < -PSD_TOL * top {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let r = eig.values.iter().filter(|&&l| l > FACE_TOL * top).count();
        if r == n {
            return Ok(None);
        }
        let basis: Vec<ComplexVector> = eig.vectors[..r].to_vec();
        let lambdas = eig.values[..r].to_vec();

        let mut b = ProblemBuilder::new();
        let v = b.add_block(Block::nonneg(1));
        let y = b.add_block(Block::psd(r));
        let s = b.add_block(Block::psd(r));
        b.add_objective(v, 1.0);
        for i in 0..r {
            b.add_objective(y + diag_index(i), lambda);
        }
        for i in 0..r {
            b.add_equality(vec![(s + i, 1.0), (v, -lambdas[i]), (y + i, 1.0)], lambdas[i] * V_FLOOR);
            for j in (i + 1)..r {
                let (re, im) = offdiag_index(r, i, j);
                b.add_equality(vec![(s + re, 1.0), (y + re, 1.0)], 0.0);
                b.add_equality(vec![(s + im, 1.0), (y + im, 1.0)], 0.0);
            }
        }
        // z^H (Q Y Q^H) z = (Q^H z)^H Y (Q^H z)
        let rows: Vec<Vec<f64>> = inst
            .ensemble
            .vectors()
            .iter()
            .map(|z| {
                let proj = ComplexVector::new(basis.iter().map(|q| q.inner(z)).collect());
                pack(&proj.outer())
            })
            .collect();
        add_rows_fit(&mut b, &rows, &inst.y, y, fit);
        Ok(Some(Self {
            basis,
            lambdas,
            problem: b.build()?,
            u0: u.u()[0].re,
        }))
    }

    fn rank(&self) -> usize {
        self.basis.len()
    }

    fn compress(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let r = self.rank();
        HermitianMatrix::from_upper(r, |i, j| self.basis[i].inner(&x.mul_vec(&self.basis[j])))
    }

    fn expand(&self, y: &HermitianMatrix) -> HermitianMatrix {
        let n = self.basis[0].len();
        let r = self.rank();
        HermitianMatrix::from_upper(n, |a, b| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..r {
                for j in 0..r {
                    acc += self.basis[i][a] * y.get(i, j) * self.basis[j][b].conj();
                }
            }
            acc
        })
    }

    fn warm(&self, point: &BmiPoint, inst: &PhaseRetrievalInstance, fit: DataFit) -> Result<WarmStart> {
        let y = psd_project(&self.compress(&point.x))?;
        let mut x = vec![(point.v - V_FLOOR).max(0.0)];
        x.extend(pack(&y));
        let slack = HermitianMatrix::from_real_diagonal(&self.lambdas).scale(point.v).sub(&y);
        x.extend(pack(&psd_project(&slack)?));
        if fit.is_noisy() {
            push_epigraph(&mut x, inst, &self.expand(&y));
        }
        let len = x.len();
        Ok(WarmStart { x, s: vec![0.0; len] })
    }

    fn solve(&self, warm: &WarmStart, solver: &SolverOptions, u: &ToeplitzParam) -> Result<(BmiPoint, f64, SolveStatus)> {
        let sol = solve(&self.problem, solver, Some(warm))?;
        let y = unpack(sol.block(1), self.rank());
        let point = BmiPoint {
            u: u.clone(),
            v: V_FLOOR + sol.block(0)[0],
            x: self.expand(&y),
        };
        let obj = self.problem.objective_value(&sol.x) + V_FLOOR + self.u0;
        Ok((point, obj, sol.status))
    }
}

fn add_rows_fit(b: &mut ProblemBuilder, rows: &[Vec<f64>], y: &[f64], x_off: usize, fit: DataFit) {
    match fit {
        DataFit::Exact => {
            for (row, &ym) in rows.iter().zip(y) {
                b.add_equality(sparse_row(row, x_off, 1.0), ym);
            }
        }
        DataFit::Penalized { delta } => {
            let t = b.add_block(Block::soc(rows.len() + 1));
            b.add_objective(t, delta);
            for (m, (row, &ym)) in rows.iter().zip(y).enumerate() {
                let mut terms = sparse_row(row, x_off, -1.0);
                terms.push((t + 1 + m, 1.0));
                b.add_equality(terms, -ym);
            }
        }
    }
}

fn push_epigraph(x: &mut Vec<f64>, inst: &PhaseRetrievalInstance, xm: &HermitianMatrix) {
    let p = pack(xm);
    let r: Vec<f64> = inst.rows.iter().zip(&inst.y).map(|(row, y)| dot(row, &p) - y).collect();
    x.push(r.iter().map(|v| v * v).sum::<f64>().sqrt());
    x.extend(r);
}

/// Runs the two-step alternation from [`BmiPoint::initial`].
pub fn run_bmi(
    inst: &PhaseRetrievalInstance,
    lambda: f64,
    fit: DataFit,
    opts: &BmiOptions,
    solver: &SolverOptions,
) -> Result<AnmPhaseLiftSolution> {
    run_bmi_from(inst, lambda, fit, BmiPoint::initial(inst)?, opts, solver)
}

/// Alternates "fix `u`, optimize `(v, X)`" and "fix `v`, optimize `(u, X)`",
/// each half-step warm-started from the incumbent.
///
/// When the fixed `T(u)` is rank-deficient the first half-step is solved on
/// the face `range(X) ⊆ range(T(u))` (see [`FACE_TOL`]); otherwise both
/// half-steps are the programs of [`build_bmi_step`] / [`build_noisy`].
///
/// A half-step whose returned objective exceeds the incumbent (beyond
/// solver slack) is not accepted; the raw value still goes into
/// `objective_trace`, so the trace reflects what the solver produced.
pub fn run_bmi_from(
    inst: &PhaseRetrievalInstance,
    lambda: f64,
    fit: DataFit,
    init: BmiPoint,
    opts: &BmiOptions,
    solver: &SolverOptions,
) -> Result<AnmPhaseLiftSolution> {
    check_lambda(lambda)?;
    fit.validate()?;
    if opts.max_outer == 0 || !(opts.rel_tol > 0.0) {
        return Err(Error::InvalidParameter("BMI options need max_outer ≥ 1 and rel_tol > 0".into()));
    }
    let n = inst.n();
    let mut cur_obj = if init.is_feasible(inst, fit)? {
        init.objective(lambda, inst, fit)
    } else {
        f64::INFINITY
    };
    let mut cur = init;
    let mut trace = Vec::with_capacity(2 * opts.max_outer);
    let mut status = SolveStatus::Solved;
    let mut converged = false;
    let mut outer = 0;

    while outer < opts.max_outer {
        outer += 1;
        let start_obj = cur_obj;
        let mut accepted = false;
        for half in 0..2 {
            let step = |solver: &SolverOptions| {
                if half == 0 {
                    match FaceStep::build(inst, lambda, fit, &cur.u)? {
                        Some(face) => face.solve(&face.warm(&cur, inst, fit)?, solver, &cur.u),
                        None => full_half_step(inst, lambda, fit, &cur, BmiFixed::U(&cur.u), solver),
                    }
                } else {
                    full_half_step(inst, lambda, fit, &cur, BmiFixed::V(cur.v), solver)
                }
            };
            let slack = PSD_TOL * (1.0 + cur_obj.abs());
            let (mut cand, mut obj, mut st) = step(solver)?;
            if st == SolveStatus::MaxIters && solver.stall_iters > 0 {
                // A stalled iterate can be slightly infeasible with a deceptively
                // low objective; give the half-step the full iteration budget.
                log::debug!("half-step stalled at {obj}; retrying without stall exit");
                (cand, obj, st) = step(&SolverOptions {
                    stall_iters: 0,
                    ..*solver
                })?;
            }
            trace.push(obj);
            status = st;
            if st != SolveStatus::InfeasibleSuspected && (obj <= cur_obj + slack || !cur_obj.is_finite()) {
                cur = cand;
                cur_obj = obj;
                accepted = true;
            } else {
                log::debug!("half-step objective {obj} ({st}) rejected against incumbent {cur_obj}");
            }
        }
        if !accepted {
            // Deterministic solves from an unchanged iterate cannot make progress.
            break;
        }
        if start_obj.is_finite() && (start_obj - cur_obj).abs() <= opts.rel_tol * start_obj.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    debug_assert_eq!(cur.x.dim(), n);

    Ok(AnmPhaseLiftSolution {
        x_hat: cur.x,
        u_hat: cur.u,
        v_hat: cur.v,
        w_hat: None,
        objective: cur_obj,
        tag: tag_for(fit.is_noisy(), FormulationTag::Bmi, FormulationTag::BmiNoisy),
        status,
        outer_iterations: outer,
        objective_trace: trace,
        converged,
    })
}

fn full_half_step(
    inst: &PhaseRetrievalInstance,
    lambda: f64,
    fit: DataFit,
    cur: &BmiPoint,
    fixed: BmiFixed<'_>,
    solver: &SolverOptions,
) -> Result<(BmiPoint, f64, SolveStatus)> {
    let p = build_bmi_with(inst, lambda, fit, fixed)?;
    let sol = solve(&p, solver, Some(&cur.to_warm(inst, fit)?))?;
    let point = BmiPoint {
        u: ToeplitzParam::from_reals(sol.block(0))?,
        v: V_FLOOR + sol.block(1)[0],
        x: unpack(sol.block(2), inst.n()),
    };
    Ok((point, objective_of(&p, &sol, true), sol.status))
}

// ---------------------------------------------------------------------------
// Linear atomic-norm program

/// `min v + tr T(u)/N  s.t.  [[v, x^H], [x, T(u)]] ⪰ 0`.
///
/// Written without the customary factor ½, so its optimum is `2‖x‖_A`; see
/// [`atomic_norm`].
pub fn build_anm_linear(x_obs: &ComplexVector) -> Result<ConicProblem> {
    let n = x_obs.len();
    if n == 0 {
        return Err(Error::InvalidParameter("observed signal must be non-empty".into()));
    }
    let mut b = ProblemBuilder::new();
    let u = b.add_block(Block::free(2 * n - 1));
    let v = b.add_block(Block::nonneg(1));
    let big = b.add_block(Block::psd(n + 1));
    add_anm_objective(&mut b, u, v, None);

    b.add_equality(vec![(big + diag_index(0), 1.0), (v, -1.0)], V_FLOOR);
    for ((k, coeff), corner) in toeplitz_coord(n).into_iter().zip(corner_coord(n)) {
        b.add_equality(vec![(big + corner, 1.0), (u + k, -coeff)], 0.0);
    }
    // Upper border holds x^H.
    for i in 0..n {
        let (re, im) = packed_pair(n + 1, 0, i + 1);
        let xi = x_obs[i].conj();
        b.add_equality(vec![(big + re, 1.0)], SQRT_2 * xi.re);
        b.add_equality(vec![(big + im.expect("off-diagonal"), 1.0)], SQRT_2 * xi.im);
    }
    b.build()
}

/// Output of the linear atomic-norm program.
#[derive(Clone, Debug)]
pub struct AnmLinearSolution {
    pub u_hat: ToeplitzParam,
    pub v_hat: f64,
    /// Optimal value of [`build_anm_linear`].
    pub objective: f64,
    pub status: SolveStatus,
}

pub fn solve_anm_linear(x_obs: &ComplexVector, opts: &SolverOptions) -> Result<AnmLinearSolution> {
    let p = build_anm_linear(x_obs)?;
    let sol = solve(&p, opts, None)?;
    Ok(AnmLinearSolution {
        u_hat: ToeplitzParam::from_reals(sol.block(0))?,
        v_hat: V_FLOOR + sol.block(1)[0],
        objective: objective_of(&p, &sol, true),
        status: sol.status,
    })
}

/// `‖x‖_A` over unit-modulus atoms, i.e. half of the linear program's optimum.
pub fn atomic_norm(x: &ComplexVector, opts: &SolverOptions) -> Result<f64> {
    Ok(0.5 * solve_anm_linear(x, opts)?.objective)
}
