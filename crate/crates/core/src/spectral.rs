//! Turning solver output into estimates: leading-eigenvector signal
//! retrieval, Vandermonde decomposition of a PSD Toeplitz matrix, global-phase
//! alignment and the error metrics used by the experiments.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{leading_eigvec, toeplitz_embed, Complex64, ComplexVector, HermitianMatrix, ToeplitzParam};
use crate::signal::{atom, wrapped_distance};

/// Default relative eigenvalue threshold for model-order selection.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;
/// Squared wrapped distance charged for every unmatched true frequency.
pub const DEFAULT_MISS_PENALTY: f64 = 0.25;
/// Relative negative-eigenvalue slack accepted as "PSD" by the decomposition.
pub const PSD_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyEstimate {
    /// Strictly increasing, in `[0, 1)`.
    pub frequencies: Vec<f64>,
    /// Nonnegative line powers, aligned with `frequencies`.
    pub powers: Vec<f64>,
    /// Set when the Toeplitz matrix had full numerical rank, so no line
    /// spectrum could be extracted.
    pub full_rank: bool,
}

impl FrequencyEstimate {
    pub fn empty() -> Self {
        Self {
            frequencies: Vec::new(),
            powers: Vec::new(),
            full_rank: false,
        }
    }

    pub fn model_order(&self) -> usize {
        self.frequencies.len()
    }
}

/// `sqrt(λ_max) v` for the leading eigenpair; zero when `λ_max ≤ 0`.
pub fn retrieve_signal(x_hat: &HermitianMatrix) -> Result<ComplexVector> {
    let (v, lam) = leading_eigvec(x_hat)?;
    if lam <= 0.0 {
        return Ok(ComplexVector::zeros(x_hat.dim()));
    }
    Ok(v.scale(Complex64::new(lam.sqrt(), 0.0)))
}

/// Rotates `x_hat` by the unit-modulus scalar that brings it closest to
/// `x_true`, returning the rotated vector and `‖e^{jφ} x̂ − x‖ / ‖x‖`.
pub fn align_phase(x_hat: &ComplexVector, x_true: &ComplexVector) -> Result<(ComplexVector, f64)> {
    if x_hat.len() != x_true.len() {
        return Err(Error::DimensionMismatch {
            what: "aligned vector length",
            expected: x_true.len(),
            found: x_hat.len(),
        });
    }
    let norm = x_true.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("reference signal is zero; phase alignment undefined".into()));
    }
    let c = x_hat.inner(x_true);
    let phase = if c.norm() > 0.0 {
        c / c.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let aligned = x_hat.scale(phase);
    let err = aligned.sub(x_true).norm() / norm;
    Ok((aligned, err))
}

/// Decomposes `T(u) = A(f) diag(d) A(f)^H`.
///
/// The model order is the number of eigenvalues above `rank_tol · λ_max`
/// unless `order` pins it. Frequencies come from the rotational invariance
/// of the leading eigenvectors (rows `1..N` versus `0..N−1`); powers from a
/// nonnegative least-squares fit of `T(u)` by the recovered atoms.
pub fn vandermonde_decompose(u: &ToeplitzParam, rank_tol: f64, order: Option<usize>) -> Result<FrequencyEstimate> {
    let n = u.len();
    let t = toeplitz_embed(u);
    let eig = t.eigh()?;
    let lam_max = eig.values[0];
    if lam_max <= 0.0 {
        let min = *eig.values.last().unwrap();
        if min < -PSD_SLACK * t.frobenius_norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        return Ok(FrequencyEstimate::empty());
    }
    let lam_min = *eig.values.last().unwrap();
    if lam_min < -PSD_SLACK * lam_max {
        return Err(Error::NotPsd { min_eigenvalue: lam_min });
    }

    let k = match order {
        Some(k) => k.min(n),
        None => eig.values.iter().filter(|&&v| v > rank_tol * lam_max).count(),
    };
    if k == 0 {
        return Ok(FrequencyEstimate::empty());
    }
    if k >= n {
        return Ok(FrequencyEstimate {
            full_rank: true,
            ..FrequencyEstimate::empty()
        });
    }

    let us = DMatrix::from_fn(n, k, |i, j| eig.vectors[j][i]);
    let upper = us.rows(0, n - 1).into_owned();
    let lower = us.rows(1, n - 1).into_owned();
    let phi = upper
        .svd(true, true)
        .solve(&lower, 1e-14)
        .map_err(|e| Error::InvalidParameter(format!("shift-invariance solve failed: {e}")))?;
    let roots = phi
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::InvalidParameter("rotation operator eigenvalues unavailable".into()))?;

    let mut freqs: Vec<f64> = roots.iter().map(|z| (z.arg() / (2.0 * PI)).rem_euclid(1.0)).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let powers = fit_powers(&t, &freqs);
    Ok(FrequencyEstimate {
        frequencies: freqs,
        powers,
        full_rank: false,
    })
}

/// NNLS fit of `Σ d_l a(f_l) a(f_l)^H` to `t` in Frobenius norm.
fn fit_powers(t: &HermitianMatrix, freqs: &[f64]) -> Vec<f64> {
    let n = t.dim();
    let atoms: Vec<ComplexVector> = freqs.iter().map(|&f| atom(f, n)).collect();
    let k = atoms.len();
    let gram = DMatrix::from_fn(k, k, |i, j| atoms[i].inner(&atoms[j]).norm_sqr());
    let rhs = DVector::from_fn(k, |i, _| t.quad_form(&atoms[i]));
    nnls(&gram, &rhs).iter().copied().collect()
}

/// Lawson–Hanson active set for `min ½ dᵀGd − hᵀd, d ≥ 0` with `G` symmetric
/// positive semidefinite (normal-equation form of nonnegative least squares).
pub fn nnls(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let k = rhs.len();
    let mut d = DVector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * gram.amax().max(rhs.amax()).max(1.0);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| gram[(idx[a], idx[b])]);
        let sr = DVector::from_fn(idx.len(), |a, _| rhs[idx[a]]);
        let sol = sub
            .clone()
            .cholesky()
            .map(|c| c.solve(&sr))
            .unwrap_or_else(|| sub.pseudo_inverse(1e-14).map(|p| p * &sr).unwrap_or_else(|_| DVector::zeros(idx.len())));
        let mut full = DVector::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            full[i] = sol[a];
        }
        full
    };

    for _ in 0..(3 * k + 10) {
        let grad = rhs - gram * &d;
        let candidate = (0..k).filter(|&i| !passive[i] && grad[i] > tol).max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let s = solve_passive(&passive);
            if (0..k).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                d = s;
                break;
            }
            let mut alpha = 1.0f64;
            for i in (0..k).filter(|&i| passive[i] && s[i] <= 0.0) {
                let denom = d[i] - s[i];
                if denom > 0.0 {
                    alpha = alpha.min(d[i] / denom);
                }
            }
            d = &d + (&s - &d) * alpha;
            for i in 0..k {
                if passive[i] && d[i] <= tol {
                    passive[i] = false;
                    d[i] = 0.0;
                }
            }
        }
    }
    d
}

/// Mean squared wrapped distance under the best one-to-one matching of
/// `min(L̂, L)` pairs; each unmatched true frequency contributes `penalty`.
pub fn frequency_mse(est: &[f64], truth: &[f64], penalty: f64) -> f64 {
    assert!(!truth.is_empty(), "frequency_mse: truth must be non-empty");
    let l = truth.len();
    let k = l.max(est.len());
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i < l && j < est.len() {
                        wrapped_distance(truth[i], est[j]).powi(2)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let mut total = 0.0;
    for (i, &j) in assignment.iter().enumerate().take(l) {
        total += if j < est.len() { cost[i][j] } else { penalty };
    }
    total / l as f64
}

/// Minimum-cost perfect matching on a square cost matrix; returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation, 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Per-trial scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryMetrics {
    pub signal_error: f64,
    pub success: bool,
    pub frequency_mse: f64,
}

impl RecoveryMetrics {
    pub fn new(signal_error: f64, success_threshold: f64, frequency_mse: f64) -> Self {
        Self {
            signal_error,
            success: signal_error <= success_threshold,
            frequency_mse,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools_free::permutations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimal permutation enumerator so the oracle does not share code with
    /// the Hungarian solver.
    mod itertools_free {
        pub fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(n - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Forward construction `u(k) = Σ d_l e^{−j2π f_l k}` (first row of A D A^H).
    fn forward_toeplitz(freqs: &[f64], powers: &[f64], n: usize) -> ToeplitzParam {
        let u = (0..n)
            .map(|k| {
                freqs
                    .iter()
                    .zip(powers)
                    .map(|(&f, &d)| d * Complex64::from_polar(1.0, -2.0 * PI * f * k as f64))
                    .sum()
            })
            .collect();
        ToeplitzParam::new(ComplexVector::new(u)).unwrap()
    }

    #[test]
    fn retrieves_rank_one_signal() {
        let x = ComplexVector::new(vec![c(1.0, 2.0), c(-0.5, 0.1), c(0.0, -1.0)]);
        let est = retrieve_signal(&x.outer()).unwrap();
        let (_, err) = align_phase(&est, &x).unwrap();
        assert!(err < 1e-10);
    }

    #[test]
    fn zero_matrix_gives_zero_signal() {
        let est = retrieve_signal(&HermitianMatrix::zeros(4)).unwrap();
        assert_eq!(est, ComplexVector::zeros(4));
    }

    #[test]
    fn near_rank_one_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ComplexVector::new((0..6).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
        let b = DMatrix::from_fn(6, 6, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let noise = HermitianMatrix::new(&b * b.adjoint()).unwrap();
        let noise = noise.scale(1e-6 / noise.frobenius_norm());
        let est = retrieve_signal(&x.outer().add(&noise)).unwrap();
        // Oracle: dominant factor from nalgebra's dense eigensolver.
        let dense = x.outer().add(&noise).as_matrix().clone();
        let emb = HermitianMatrix::new(dense).unwrap().real_embedding().symmetric_eigen();
        let top = emb.eigenvalues.imax();
        let col = emb.eigenvectors.column(top);
        let v = ComplexVector::new((0..6).map(|i| c(col[i], col[i + 6])).collect());
        let dominant = v.scale(c(emb.eigenvalues[top].sqrt(), 0.0));
        let (_, err) = align_phase(&est, &dominant).unwrap();
        assert!(err <= 1e-3);
    }

    #[test]
    fn alignment_removes_global_phase() {
        let x = ComplexVector::new(vec![c(1.0, -1.0), c(0.3, 2.0)]);
        let (_, err) = align_phase(&x.scale(Complex64::from_polar(1.0, 1.3)), &x).unwrap();
        assert!(err < 1e-12);
        let (aligned, err) = align_phase(&x, &x).unwrap();
        assert!(err < 1e-15);
        assert_eq!(aligned, x);
    }

    #[test]
    fn alignment_rejects_zero_reference() {
        let x = ComplexVector::new(vec![c(1.0, 0.0)]);
        assert!(align_phase(&x, &ComplexVector::zeros(1)).is_err());
    }

    #[test]
    fn alignment_beats_phase_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3 {
            let a = ComplexVector::new((0..5).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
            let b = ComplexVector::new((0..5).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
            let (_, closed) = align_phase(&a, &b).unwrap();
            let grid = (0..1_000_000)
                .map(|k| {
                    let ph = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 1e6);
                    a.scale(ph).sub(&b).norm() / b.norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(closed <= grid + 1e-9);
        }
    }

    #[test]
    fn alignment_error_ignores_common_phase() {
        let a = ComplexVector::new(vec![c(1.0, 0.5), c(-0.2, 0.4)]);
        let b = ComplexVector::new(vec![c(0.9, 0.4), c(-0.1, 0.6)]);
        let rot = Complex64::from_polar(1.0, 2.2);
        let (_, e1) = align_phase(&a, &b).unwrap();
        let (_, e2) = align_phase(&a.scale(rot), &b.scale(rot)).unwrap();
        assert!((e1 - e2).abs() < 1e-14);
    }

    #[test]
    fn single_line_decomposition() {
        let est = vandermonde_decompose(&forward_toeplitz(&[0.3], &[2.0], 8), DEFAULT_RANK_TOL, None).unwrap();
        assert_eq!(est.model_order(), 1);
        assert!((est.frequencies[0] - 0.3).abs() < 1e-8);
        assert!((est.powers[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn two_line_decomposition() {
        let est = vandermonde_decompose(&forward_toeplitz(&[0.15, 0.65], &[1.0, 3.0], 8), DEFAULT_RANK_TOL, None).unwrap();
        assert_eq!(est.model_order(), 2);
        assert!((est.frequencies[0] - 0.15).abs() < 1e-6);
        assert!((est.frequencies[1] - 0.65).abs() < 1e-6);
        assert!((est.powers[0] - 1.0).abs() < 1e-4);
        assert!((est.powers[1] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn identity_is_full_rank() {
        let est = vandermonde_decompose(&ToeplitzParam::scaled_identity(6, 1.0), DEFAULT_RANK_TOL, None).unwrap();
        assert!(est.full_rank);
        assert_eq!(est.model_order(), 0);
    }

    #[test]
    fn zero_matrix_gives_empty_estimate() {
        let est = vandermonde_decompose(&ToeplitzParam::scaled_identity(6, 0.0), DEFAULT_RANK_TOL, None).unwrap();
        assert_eq!(est, FrequencyEstimate::empty());
    }

    #[test]
    fn indefinite_toeplitz_is_rejected() {
        let u = ToeplitzParam::new(ComplexVector::new(vec![c(0.0, 0.0), c(1.0, 0.0)])).unwrap();
        assert!(matches!(
            vandermonde_decompose(&u, DEFAULT_RANK_TOL, None),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn pinned_order_overrides_threshold() {
        let u = forward_toeplitz(&[0.1, 0.6], &[1.0, 1e-9], 8);
        let auto = vandermonde_decompose(&u, DEFAULT_RANK_TOL, None).unwrap();
        assert_eq!(auto.model_order(), 1);
        let pinned = vandermonde_decompose(&u, DEFAULT_RANK_TOL, Some(2)).unwrap();
        assert_eq!(pinned.model_order(), 2);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(frequency_mse(&[0.1, 0.4], &[0.1, 0.4], 0.25), 0.0);
        assert!((frequency_mse(&[0.99], &[0.01], 0.25) - 4e-4).abs() < 1e-15);
        assert!((frequency_mse(&[], &[0.2, 0.5], 0.25) - 0.25).abs() < 1e-15);
        assert!((frequency_mse(&[0.2], &[0.2, 0.5], 0.25) - 0.125).abs() < 1e-15);
        // Extra estimates are ignored.
        assert!((frequency_mse(&[0.2, 0.7, 0.9], &[0.2], 0.25)).abs() < 1e-15);
    }

    #[test]
    fn mse_matches_exhaustive_matching() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let l = rng.gen_range(1..5);
            let truth: Vec<f64> = (0..l).map(|_| rng.gen()).collect();
            let est: Vec<f64> = (0..l).map(|_| rng.gen()).collect();
            let brute = permutations(l)
                .iter()
                .map(|p| (0..l).map(|i| wrapped_distance(truth[i], est[p[i]]).powi(2)).sum::<f64>() / l as f64)
                .fold(f64::INFINITY, f64::min);
            assert!((frequency_mse(&est, &truth, 0.25) - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn nnls_clamps_negative_solution() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let h = DVector::from_vec(vec![2.0, -1.0]);
        let d = nnls(&g, &h);
        assert_eq!(d.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn success_flag_follows_threshold() {
        assert!(RecoveryMetrics::new(0.009, 1e-2, 0.0).success);
        assert!(!RecoveryMetrics::new(0.011, 1e-2, 0.0).success);
    }
}
