//! Cyclic Jacobi eigensolver for small dense real symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm target, relative to the full Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-12;
/// Sweep cap before reporting non-convergence.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (unsorted) and the matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    /// Indices of the eigenvalues sorted in descending order.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx
    }
}

/// Eigendecomposition of a symmetric matrix. Only the upper triangle is read.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    jacobi_eigen_from(a, DMatrix::identity(n, n))
}

/// Jacobi iteration started from an orthogonal basis `basis`; the matrix is
/// first rotated into that basis. A basis close to the eigenvectors (for
/// instance from a previous, nearby matrix) cuts the sweep count to one or two.
pub fn jacobi_eigen_from(a: &DMatrix<f64>, basis: DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigen: matrix must be square");
    assert_eq!(basis.shape(), (n, n), "jacobi_eigen: basis shape");

    let sym = DMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = basis;
    let rotated = if is_identity(&v) {
        sym
    } else {
        v.transpose() * &sym * &v
    };

    // Row-major working copy; column-major `v` is rotated in place.
    let mut m: Vec<f64> = (0..n * n).map(|k| rotated[(k / n, k % n)]).collect();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }

    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_TOL * total.max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m, n);
        if off <= target || total == 0.0 {
            break;
        }
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNonConvergence {
                sweeps,
                off_diagonal: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Skip rotations that cannot change the diagonal at working precision.
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;

                let (vp, vq) = two_columns_mut(&mut v, p, q);
                for k in 0..n {
                    let a = vp[k];
                    let b = vq[k];
                    vp[k] = c * a - s * b;
                    vq[k] = s * a + c * b;
                }
            }
        }
    }

    let values = DVector::from_fn(n, |i, _| m[i * n + i]);
    Ok(SymmetricEigen {
        values,
        vectors: v,
        sweeps,
    })
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * m[i * n + j] * m[i * n + j];
        }
    }
    s.sqrt()
}

fn is_identity(v: &DMatrix<f64>) -> bool {
    let n = v.nrows();
    (0..n).all(|i| (0..n).all(|j| v[(i, j)] == if i == j { 1.0 } else { 0.0 }))
}

fn two_columns_mut(v: &mut DMatrix<f64>, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let n = v.nrows();
    let data = v.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * n);
    (&mut head[p * n..(p + 1) * n], &mut tail[..n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &b + b.transpose()
    }

    #[test]
    fn diagonal_matrix_needs_no_sweeps() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let e = jacobi_eigen(&a).unwrap();
        assert_eq!(e.sweeps, 0);
        let order = e.descending_order();
        assert_eq!(e.values[order[0]], 3.0);
        assert_eq!(e.values[order[2]], -1.0);
    }

    #[test]
    fn matches_nalgebra_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 16, 34] {
            let a = random_symmetric(n, &mut rng);
            let e = jacobi_eigen(&a).unwrap();
            let mut ours: Vec<f64> = e.values.iter().copied().collect();
            ours.sort_by(f64::total_cmp);
            let mut theirs: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            theirs.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()), "{x} vs {y}");
            }
            let recon = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
            assert!((recon - &a).norm() < 1e-10 * (1.0 + a.norm()));
            let gram = e.vectors.transpose() * &e.vectors;
            assert!((gram - DMatrix::identity(n, n)).norm() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn warm_basis_converges_faster() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(16, &mut rng);
        let cold = jacobi_eigen(&a).unwrap();
        let bump = random_symmetric(16, &mut rng) * 1e-6;
        let a2 = &a + bump;
        let warm = jacobi_eigen_from(&a2, cold.vectors.clone()).unwrap();
        let fresh = jacobi_eigen(&a2).unwrap();
        assert!(warm.sweeps < fresh.sweeps);
        let recon = &warm.vectors * DMatrix::from_diagonal(&warm.values) * warm.vectors.transpose();
        assert!((recon - &a2).norm() < 1e-10);
    }
}
