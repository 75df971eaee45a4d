//! ADMM splitting between the affine set `{x : A x = b}` and the cone `K`.
//!
//! With scaled dual `μ` the iteration is
//!
//! ```text
//! x   = Π_aff(z − μ − c/ρ)
//! x̂   = α x + (1 − α) z
//! z⁺  = Π_K(x̂ + μ)
//! μ⁺  = μ + x̂ − z⁺
//! ```
//!
//! `Π_aff` is a fixed matrix (independent of `ρ`), so the penalty can be
//! rebalanced at any time without refactoring. `s = −ρ μ` stays in the dual
//! cone and is complementary to `z`, so convergence is measured by the
//! equality residual of `z` and the dual residual `Π_null(A)(c − s)`.

use nalgebra::{DMatrix, DVector};

use super::cones::ConeProjector;
use super::scaling::{equilibrate, Scaling};
use super::{ConicProblem, ConicSolution, SolveStatus, SolverOptions, WarmStart};
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const ADAPT_EVERY: usize = 50;
const DIVERGENCE_LIMIT: f64 = 1e12;
/// Progress (relative drop of the best residual score) that resets the
/// stagnation counter.
const STALL_FACTOR: f64 = 0.5;

struct AffineProjector {
    /// `I − Aᵀ(A Aᵀ)⁻¹A`
    null_proj: DMatrix<f64>,
    /// `Aᵀ(A Aᵀ)⁻¹ b`
    offset: DVector<f64>,
}

impl AffineProjector {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 {
            return Ok(Self {
                null_proj: DMatrix::identity(n, n),
                offset: DVector::zeros(n),
            });
        }
        let gram = a * a.transpose();
        // Aᵀ(A Aᵀ)⁻¹, falling back to the pseudo-inverse for redundant rows.
        let right_inv = match gram.clone().cholesky() {
            Some(ch) => a.transpose() * ch.inverse(),
            None => {
                let tol = 1e-12 * gram.amax().max(1.0);
                let pinv = gram.pseudo_inverse(tol).map_err(|_| Error::RankDeficient)?;
                a.transpose() * pinv
            }
        };
        let offset = &right_inv * b;
        if (a * &offset - b).norm() > 1e-8 * (1.0 + b.norm()) {
            log::debug!("equality constraints appear inconsistent; solve will not reach primal tolerance");
        }
        let null_proj = DMatrix::identity(n, n) - &right_inv * a;
        Ok(Self { null_proj, offset })
    }
}

/// Solves `p` by ADMM. `warm` must come from a problem with the same
/// variable layout; it is ignored when the lengths do not match.
pub fn solve(p: &ConicProblem, opts: &SolverOptions, warm: Option<&WarmStart>) -> Result<ConicSolution> {
    opts.validate()?;
    let n = p.num_vars();
    let (scaling, a, b, c) = equilibrate(
        p.constraint_matrix(),
        p.rhs(),
        p.objective(),
        p.blocks(),
        opts.equilibration_passes,
    );
    let Scaling { row, col, cost } = scaling;
    let aff = AffineProjector::new(&a, &b)?;
    let mut cones = ConeProjector::new(p.blocks());

    let alpha = opts.relaxation;
    let mut rho = opts.rho;

    let mut z = DVector::zeros(n);
    let mut mu = DVector::zeros(n);
    if let Some(w) = warm.filter(|w| w.x.len() == n && w.s.len() == n) {
        for j in 0..n {
            z[j] = w.x[j] / col[j];
            mu[j] = -cost * col[j] * w.s[j] / rho;
        }
        cones.project(z.as_mut_slice())?;
    }

    let res = Residuals {
        a: &a,
        b: &b,
        c: &c,
        row: &row,
        col: &col,
        cost,
        null_proj: &aff.null_proj,
        b_norm: p.rhs().norm(),
        c_norm: p.objective().norm(),
    };

    let mut x = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    let mut v = DVector::zeros(n);

    let mut best: Option<(f64, DVector<f64>, DVector<f64>, f64)> = None;
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut stall_ref = f64::INFINITY;
    let mut stall_since = 0;

    for it in 1..=opts.max_iters {
        iterations = it;
        for j in 0..n {
            w[j] = z[j] - mu[j] - c[j] / rho;
        }
        x.gemv(1.0, &aff.null_proj, &w, 0.0);
        x += &aff.offset;

        for j in 0..n {
            v[j] = alpha * x[j] + (1.0 - alpha) * z[j] + mu[j];
        }
        z.copy_from(&v);
        cones.project(z.as_mut_slice())?;
        for j in 0..n {
            mu[j] = v[j] - z[j];
        }

        if it % opts.check_every != 0 {
            continue;
        }

        let r = res.evaluate(&z, &mu, rho);
        if !r.primal.is_finite() || !r.dual.is_finite() {
            status = SolveStatus::InfeasibleSuspected;
            break;
        }
        let score = (r.primal / opts.tol_primal).max(r.dual / opts.tol_dual);
        if best.as_ref().map_or(true, |bst| score <= bst.0) {
            best = Some((score, z.clone(), mu.clone(), rho));
        }
        if score < STALL_FACTOR * stall_ref {
            stall_ref = score;
            stall_since = it;
        }
        if r.primal <= opts.tol_primal && r.dual <= opts.tol_dual {
            status = SolveStatus::Solved;
            break;
        }
        if opts.stall_iters > 0 && it - stall_since >= opts.stall_iters {
            log::debug!("stopping after {it} iterations: no residual progress in {} iterations", opts.stall_iters);
            break;
        }
        if z.amax() > DIVERGENCE_LIMIT || rho * mu.amax() > DIVERGENCE_LIMIT {
            status = SolveStatus::InfeasibleSuspected;
            break;
        }

        if opts.adaptive_rho && it % ADAPT_EVERY == 0 && r.primal_scaled > 0.0 && r.dual_scaled > 0.0 {
            let ratio = (r.primal_scaled / r.dual_scaled).sqrt();
            if !(0.2..=5.0).contains(&ratio) {
                let new_rho = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                mu *= rho / new_rho;
                rho = new_rho;
            }
        }
    }

    if status != SolveStatus::Solved {
        if let Some((_, bz, bmu, brho)) = best {
            z = bz;
            mu = bmu;
            rho = brho;
        }
    }
    let r = res.evaluate(&z, &mu, rho);

    let xs = unscale(&z, &col);
    let s: Vec<f64> = (0..n).map(|j| -rho * mu[j] / (col[j] * cost)).collect();
    let objective = p.objective_value(&xs);
    let mut offsets: Vec<usize> = (0..p.blocks().len()).map(|i| p.block_range(i).start).collect();
    offsets.push(n);
    Ok(ConicSolution {
        objective,
        primal_residual: r.primal,
        dual_residual: r.dual,
        status,
        iterations,
        warm: WarmStart { x: xs.clone(), s },
        x: xs,
        offsets,
    })
}

struct ResidualValues {
    primal: f64,
    dual: f64,
    primal_scaled: f64,
    dual_scaled: f64,
}

struct Residuals<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    c: &'a DVector<f64>,
    row: &'a DVector<f64>,
    col: &'a DVector<f64>,
    cost: f64,
    null_proj: &'a DMatrix<f64>,
    b_norm: f64,
    c_norm: f64,
}

impl Residuals<'_> {
    /// Equality residual of `z` and dual residual of `s = −ρμ`, both in
    /// original units relative to `1 + ‖b‖` and `1 + ‖c‖`, plus their
    /// scaled-space counterparts used for penalty balancing.
    fn evaluate(&self, z: &DVector<f64>, mu: &DVector<f64>, rho: f64) -> ResidualValues {
        let rp = self.a * z - self.b;
        let primal = rp
            .iter()
            .zip(self.row.iter())
            .map(|(r, d)| (r / d).powi(2))
            .sum::<f64>()
            .sqrt()
            / (1.0 + self.b_norm);
        let w = self.c + mu * rho;
        let rd = self.null_proj * w;
        let dual = rd
            .iter()
            .zip(self.col.iter())
            .map(|(r, e)| (r / (e * self.cost)).powi(2))
            .sum::<f64>()
            .sqrt()
            / (1.0 + self.c_norm);
        ResidualValues {
            primal,
            dual,
            primal_scaled: rp.norm() / (1.0 + self.b.norm()),
            dual_scaled: rd.norm() / (1.0 + self.c.norm()),
        }
    }
}

fn unscale(z: &DVector<f64>, col: &DVector<f64>) -> Vec<f64> {
    z.iter().zip(col.iter()).map(|(z, e)| z * e).collect()
}
