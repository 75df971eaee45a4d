//! Complex vectors, Hermitian matrices and the structured primitives built on
//! them: Hermitian Toeplitz embedding and its adjoint, projection onto the PSD
//! cone, and leading eigenpairs.
//!
//! Every eigenproblem is solved on the real symmetric embedding
//! `[[Re M, -Im M], [Im M, Re M]]`, whose spectrum is that of `M` with each
//! eigenvalue repeated twice. A single real Jacobi solver therefore serves
//! every Hermitian eigenproblem in the crate.

mod jacobi;
pub mod packing;

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;

use crate::error::{Error, Result};

pub use jacobi::{jacobi_eigen, jacobi_eigen_from, SymmetricEigen, JACOBI_MAX_SWEEPS, JACOBI_TOL};

/// Largest tolerated `|M(i,j) - conj(M(j,i))|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector(DVector<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self(DVector::from_vec(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn from_dvector(v: DVector<Complex64>) -> Self {
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self^H other`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.len(), other.len(), "inner: length mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    /// The rank-one lift `x x^H`.
    pub fn outer(&self) -> HermitianMatrix {
        let n = self.len();
        HermitianMatrix::from_upper(n, |i, j| self.0[i] * self.0[j].conj())
    }
}

impl std::ops::Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Validates squareness and Hermitian symmetry (tolerance [`HERMITIAN_TOL`]).
    /// Matrices outside the tolerance are rejected, never symmetrized.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "square matrix columns",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                max_violation: worst,
            });
        }
        let mut m = m;
        for i in 0..n {
            m[(i, i)].im = 0.0;
            for j in (i + 1)..n {
                m[(j, i)] = m[(i, j)].conj();
            }
        }
        Ok(Self(m))
    }

    /// Builds the matrix from its upper triangle; the diagonal is taken real.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(f(i, i).re, 0.0);
            for j in (i + 1)..n {
                let z = f(i, j);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        Self::from_upper(d.len(), |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Real inner product `Re tr(A^H B)`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "inner: dimension mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn mul_vec(&self, x: &ComplexVector) -> ComplexVector {
        ComplexVector(&self.0 * x.as_dvector())
    }

    /// `z^H M z`, real for Hermitian `M`.
    pub fn quad_form(&self, z: &ComplexVector) -> f64 {
        z.inner(&self.mul_vec(z)).re
    }

    /// `[[Re M, -Im M], [Im M, Re M]]`.
    pub fn real_embedding(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut r = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.0[(i, j)];
                r[(i, j)] = z.re;
                r[(i + n, j + n)] = z.re;
                r[(i + n, j)] = z.im;
                r[(i, j + n)] = -z.im;
            }
        }
        r
    }

    /// Inverse of [`real_embedding`](Self::real_embedding), averaging the
    /// duplicated blocks so that a nearly-structured input maps to the
    /// nearest Hermitian matrix.
    pub fn from_real_embedding(r: &DMatrix<f64>) -> Self {
        let n = r.nrows() / 2;
        Self::from_upper(n, |i, j| {
            let re = 0.25 * (r[(i, j)] + r[(i + n, j + n)] + r[(j, i)] + r[(j + n, i + n)]);
            let im = 0.25 * (r[(i + n, j)] - r[(i, j + n)] - r[(j + n, i)] + r[(j, i + n)]);
            Complex64::new(re, im)
        })
    }

    /// Full eigendecomposition, eigenvalues in descending order.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        let n = self.dim();
        let e = jacobi_eigen(&self.real_embedding())?;
        let order = e.descending_order();

        // Every complex eigenvalue appears twice in the embedding.
        let values: Vec<f64> = order.iter().step_by(2).map(|&k| e.values[k]).collect();

        // The real eigenvectors come in pairs spanning {v, jv}; pick a complex
        // orthonormal basis by greedy maximum-residual selection inside each
        // window of 2(k+1) leading real vectors.
        let candidates: Vec<ComplexVector> = order
            .iter()
            .map(|&k| {
                let col = e.vectors.column(k);
                ComplexVector::new((0..n).map(|i| Complex64::new(col[i], col[i + n])).collect())
            })
            .collect();
        let mut used = vec![false; 2 * n];
        let mut vectors: Vec<ComplexVector> = Vec::with_capacity(n);
        for k in 0..n {
            let window = (2 * (k + 1)).min(2 * n);
            let mut best: Option<(usize, ComplexVector, f64)> = None;
            for (idx, cand) in candidates.iter().enumerate().take(window) {
                if used[idx] {
                    continue;
                }
                let mut r = cand.clone();
                for q in &vectors {
                    let c = q.inner(&r);
                    r = r.sub(&q.scale(c));
                }
                let rn = r.norm();
                if best.as_ref().map_or(true, |b| rn > b.2) {
                    best = Some((idx, r, rn));
                }
            }
            let (idx, r, rn) = best.expect("window always holds an unused candidate");
            used[idx] = true;
            vectors.push(r.scale(Complex64::new(1.0 / rn, 0.0)));
        }
        Ok(HermitianEigen { values, vectors })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().unwrap_or(&0.0))
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let e = jacobi_eigen(&self.real_embedding())?;
        let order = e.descending_order();
        Ok(order.iter().step_by(2).map(|&k| e.values[k]).collect())
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<ComplexVector>,
}

/// First row `u` of a Hermitian Toeplitz matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzParam {
    u: ComplexVector,
}

impl ToeplitzParam {
    pub fn new(u: ComplexVector) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::InvalidParameter("Toeplitz parameter must be non-empty".into()));
        }
        let im = u[0].im;
        if im.abs() > HERMITIAN_TOL {
            return Err(Error::ComplexDiagonal(im));
        }
        let mut entries = u.as_slice().to_vec();
        entries[0].im = 0.0;
        Ok(Self {
            u: ComplexVector::new(entries),
        })
    }

    /// `u = (c, 0, ..., 0)`, i.e. `T(u) = c I`.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n];
        entries[0] = Complex64::new(c, 0.0);
        Self {
            u: ComplexVector::new(entries),
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &ComplexVector {
        &self.u
    }

    /// Real coordinates `(u0, Re u1, Im u1, ..., Re u_{N-1}, Im u_{N-1})`.
    pub fn to_reals(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len() - 1);
        out.push(self.u[0].re);
        for k in 1..self.len() {
            out.push(self.u[k].re);
            out.push(self.u[k].im);
        }
        out
    }

    pub fn from_reals(r: &[f64]) -> Result<Self> {
        if r.is_empty() || r.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "Toeplitz real coordinates must have odd length, got {}",
                r.len()
            )));
        }
        let n = (r.len() + 1) / 2;
        let mut entries = Vec::with_capacity(n);
        entries.push(Complex64::new(r[0], 0.0));
        for k in 1..n {
            entries.push(Complex64::new(r[2 * k - 1], r[2 * k]));
        }
        Ok(Self {
            u: ComplexVector::new(entries),
        })
    }

    /// The inner product under which [`toeplitz_adjoint`] is the adjoint of
    /// [`toeplitz_embed`]: `Re(conj(u0) w0) + 2 Σ_{k>0} Re(conj(u_k) w_k)`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "inner: length mismatch");
        let mut s = (self.u[0].conj() * other.u[0]).re;
        for k in 1..self.len() {
            s += 2.0 * (self.u[k].conj() * other.u[k]).re;
        }
        s
    }
}

/// `T(u)` with `T(i,j) = u(j-i)` on and above the diagonal.
pub fn toeplitz_embed(p: &ToeplitzParam) -> HermitianMatrix {
    HermitianMatrix::from_upper(p.len(), |i, j| p.u[j - i])
}

/// Sums along each superdiagonal: `u(k) = Σ_i M(i, i+k)`.
pub fn toeplitz_adjoint(m: &HermitianMatrix) -> ToeplitzParam {
    let n = m.dim();
    let entries = (0..n)
        .map(|k| (0..n - k).map(|i| m.get(i, i + k)).sum())
        .collect();
    ToeplitzParam::new(ComplexVector::new(entries)).expect("diagonal sum of a Hermitian matrix is real")
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clamped to zero.
pub fn psd_project(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let e = jacobi_eigen(&m.real_embedding())?;
    let n2 = e.values.len();
    let mut r = DMatrix::zeros(n2, n2);
    for k in 0..n2 {
        let lam = e.values[k];
        if lam > 0.0 {
            let q = e.vectors.column(k);
            r += lam * q * q.transpose();
        }
    }
    Ok(HermitianMatrix::from_real_embedding(&r))
}

/// Unit-norm leading eigenvector and the largest eigenvalue. The phase is
/// fixed so that the entry of largest modulus is real and positive.
pub fn leading_eigvec(m: &HermitianMatrix) -> Result<(ComplexVector, f64)> {
    if m.dim() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let n = m.dim();
    let e = jacobi_eigen(&m.real_embedding())?;
    let top = e.descending_order()[0];
    let col = e.vectors.column(top);
    let v = ComplexVector::new((0..n).map(|i| Complex64::new(col[i], col[i + n])).collect());
    let pivot = v
        .as_slice()
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .expect("non-empty");
    let phase = if pivot.norm() > 0.0 {
        pivot.conj() / pivot.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let v = v.scale(phase);
    let nv = v.norm();
    Ok((v.scale(Complex64::new(1.0 / nv, 0.0)), e.values[top]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
        ComplexVector::new((0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        HermitianMatrix::from_upper(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_toeplitz(n: usize, rng: &mut ChaCha8Rng) -> ToeplitzParam {
        let mut u = random_vector(n, rng).as_slice().to_vec();
        u[0].im = 0.0;
        ToeplitzParam::new(ComplexVector::new(u)).unwrap()
    }

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let b = DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HermitianMatrix::new(&b * b.adjoint()).unwrap()
    }

    fn atom(f: f64, n: usize) -> ComplexVector {
        ComplexVector::new(
            (0..n)
                .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * k as f64))
                .collect(),
        )
    }

    #[test]
    fn delta_first_row_embeds_to_identity() {
        let p = ToeplitzParam::scaled_identity(4, 1.0);
        assert_eq!(toeplitz_embed(&p), HermitianMatrix::identity(4));
    }

    #[test]
    fn three_by_three_embedding() {
        let p = ToeplitzParam::new(ComplexVector::new(vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)])).unwrap();
        let t = toeplitz_embed(&p);
        let expected = [
            [c(2.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
            [c(0.0, -1.0), c(2.0, 0.0), c(0.0, 1.0)],
            [c(0.0, 0.0), c(0.0, -1.0), c(2.0, 0.0)],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.get(i, j), expected[i][j]);
            }
        }
    }

    #[test]
    fn spectral_toeplitz_matches_vandermonde_product() {
        let n = 8;
        let (d, f) = ([1.0, 2.0], [0.1, 0.4]);
        let u: Vec<Complex64> = (0..n)
            .map(|k| {
                d.iter()
                    .zip(&f)
                    .map(|(&dl, &fl)| dl * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * fl * k as f64))
                    .sum()
            })
            .collect();
        // First row of A D A^H is Σ d_l e^{-j2π f_l n}.
        let t = toeplitz_embed(&ToeplitzParam::new(ComplexVector::new(u)).unwrap());
        // Oracle: explicit A(f) diag(d) A(f)^H.
        let a = DMatrix::from_fn(n, 2, |i, l| atom(f[l], n)[i]);
        let dd = DMatrix::from_diagonal(&DVector::from_vec(d.iter().map(|&x| c(x, 0.0)).collect()));
        let oracle = &a * dd * a.adjoint();
        assert!((t.as_matrix() - oracle).norm() < 1e-10);
    }

    #[test]
    fn embedded_matrix_is_toeplitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.gen_range(1..10);
            let t = toeplitz_embed(&random_toeplitz(n, &mut rng));
            for i in 1..n {
                for j in 1..n {
                    assert_eq!(t.get(i, j), t.get(i - 1, j - 1));
                }
            }
        }
    }

    #[test]
    fn adjoint_of_identity() {
        let u = toeplitz_adjoint(&HermitianMatrix::identity(4));
        assert_eq!(u.u().as_slice(), &[c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u = random_toeplitz(8, &mut rng);
            let m = random_hermitian(8, &mut rng);
            let lhs = toeplitz_embed(&u).inner(&m);
            let rhs = u.inner(&toeplitz_adjoint(&m));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn adjoint_of_embedding_counts_diagonal_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u0 = random_toeplitz(6, &mut rng);
        let u = toeplitz_adjoint(&toeplitz_embed(&u0));
        for k in 0..6 {
            let expected = u0.u()[k] * (6 - k) as f64;
            assert!((u.u()[k] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
        let u = ComplexVector::new(vec![c(1.0, 1e-6)]);
        assert!(matches!(ToeplitzParam::new(u), Err(Error::ComplexDiagonal(_))));
    }

    #[test]
    fn projection_fixes_psd_matrices() {
        let id = HermitianMatrix::identity(5);
        let p = psd_project(&id).unwrap();
        assert!(p.sub(&id).frobenius_norm() < 1e-12);
    }

    #[test]
    fn projection_clamps_negative_eigenvalue() {
        let m = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        let p = psd_project(&m).unwrap();
        assert!(p.sub(&HermitianMatrix::from_real_diagonal(&[1.0, 0.0])).frobenius_norm() < 1e-12);
    }

    #[test]
    fn projection_satisfies_variational_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_hermitian(8, &mut rng);
        let r = psd_project(&m).unwrap();
        assert!(r.min_eigenvalue().unwrap() >= -1e-10);
        let diff = r.sub(&m);
        for _ in 0..100 {
            let p = random_psd(8, &mut rng);
            assert!(diff.inner(&p.sub(&r)) >= -1e-9);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p1 = psd_project(&random_hermitian(7, &mut rng)).unwrap();
            let p2 = psd_project(&p1).unwrap();
            assert!(p1.sub(&p2).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn leading_eigvec_of_rank_one() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = ComplexVector::new(vec![c(s, 0.0), c(0.0, s)]);
        let (v, lam) = leading_eigvec(&x.outer()).unwrap();
        assert!((lam - 1.0).abs() < 1e-12);
        assert!((x.inner(&v).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leading_eigvec_of_diagonal() {
        let (v, lam) = leading_eigvec(&HermitianMatrix::from_real_diagonal(&[3.0, 1.0])).unwrap();
        assert_eq!(lam, 3.0);
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-12 && v[1].norm() < 1e-12);
    }

    #[test]
    fn leading_eigvec_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let m = random_psd(8, &mut rng);
            let (v, lam) = leading_eigvec(&m).unwrap();
            let resid = m.mul_vec(&v).sub(&v.scale(c(lam, 0.0))).norm();
            assert!(resid <= 1e-8 * m.frobenius_norm());
            // Oracle: nalgebra's QR-based solver on the same real embedding.
            let oracle = m.real_embedding().symmetric_eigen().eigenvalues.max();
            assert!((lam - oracle).abs() < 1e-10 * oracle.abs());
        }
    }

    #[test]
    fn rank_one_recovers_signal_up_to_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x = random_vector(8, &mut rng);
            let (v, lam) = leading_eigvec(&x.outer()).unwrap();
            let est = v.scale(c(lam.sqrt(), 0.0));
            let phase = est.inner(&x);
            let phase = phase / phase.norm();
            assert!(est.scale(phase).sub(&x).norm() <= 1e-8 * x.norm());
        }
    }

    #[test]
    fn embedding_doubles_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let m = random_hermitian(6, &mut rng);
            let mut complex_eigs: Vec<f64> = DMatrix::from_fn(6, 6, |i, j| m.get(i, j))
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            complex_eigs.sort_by(f64::total_cmp);
            let mut real_eigs: Vec<f64> = m.real_embedding().symmetric_eigen().eigenvalues.iter().copied().collect();
            real_eigs.sort_by(f64::total_cmp);
            for (k, lam) in complex_eigs.iter().enumerate() {
                assert!((real_eigs[2 * k] - lam).abs() < 1e-10);
                assert!((real_eigs[2 * k + 1] - lam).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigh_returns_orthonormal_basis_even_when_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cases = vec![HermitianMatrix::identity(4), random_psd(5, &mut rng), {
            let x = random_vector(5, &mut rng);
            x.outer().add(&HermitianMatrix::identity(5))
        }];
        for m in cases {
            let e = m.eigh().unwrap();
            let n = m.dim();
            for i in 0..n {
                let mv = m.mul_vec(&e.vectors[i]);
                assert!(mv.sub(&e.vectors[i].scale(c(e.values[i], 0.0))).norm() < 1e-9);
                for j in 0..n {
                    let g = e.vectors[i].inner(&e.vectors[j]);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((g - c(expected, 0.0)).norm() < 1e-10);
                }
            }
        }
    }
}
