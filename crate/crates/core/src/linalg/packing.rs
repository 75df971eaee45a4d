//! Isometric real coordinates for Hermitian matrices.
//!
//! A `d×d` Hermitian matrix is stored as `d²` reals: the `d` diagonal entries,
//! then for every `i < j` (row-major) the pair `(√2 Re M(i,j), √2 Im M(i,j))`.
//! The Euclidean inner product of two packed vectors equals `Re tr(A^H B)`.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use super::{jacobi_eigen_from, Complex64, HermitianMatrix};
use crate::error::Result;

pub fn packed_len(d: usize) -> usize {
    d * d
}

pub fn diag_index(i: usize) -> usize {
    i
}

/// Indices of `(√2 Re, √2 Im)` for the entry `(i, j)`, `i < j`.
pub fn offdiag_index(d: usize, i: usize, j: usize) -> (usize, usize) {
    debug_assert!(i < j && j < d);
    let pair = i * (2 * d - i - 1) / 2 + (j - i - 1);
    (d + 2 * pair, d + 2 * pair + 1)
}

pub fn pack(m: &HermitianMatrix) -> Vec<f64> {
    let d = m.dim();
    let mut out = vec![0.0; packed_len(d)];
    for i in 0..d {
        out[i] = m.get(i, i).re;
        for j in (i + 1)..d {
            let (re, im) = offdiag_index(d, i, j);
            let z = m.get(i, j);
            out[re] = SQRT_2 * z.re;
            out[im] = SQRT_2 * z.im;
        }
    }
    out
}

pub fn unpack(p: &[f64], d: usize) -> HermitianMatrix {
    assert_eq!(p.len(), packed_len(d), "unpack: length mismatch");
    HermitianMatrix::from_upper(d, |i, j| {
        if i == j {
            Complex64::new(p[i], 0.0)
        } else {
            let (re, im) = offdiag_index(d, i, j);
            Complex64::new(p[re] / SQRT_2, p[im] / SQRT_2)
        }
    })
}

/// Real symmetric embedding `[[A, -B], [B, A]]` of the packed matrix `A + jB`.
pub fn packed_real_embedding(p: &[f64], d: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        r[(i, i)] = p[i];
        r[(i + d, i + d)] = p[i];
        for j in (i + 1)..d {
            let (ri, ii) = offdiag_index(d, i, j);
            let a = p[ri] / SQRT_2;
            let b = p[ii] / SQRT_2;
            r[(i, j)] = a;
            r[(j, i)] = a;
            r[(i + d, j + d)] = a;
            r[(j + d, i + d)] = a;
            r[(i + d, j)] = b;
            r[(j + d, i)] = -b;
            r[(i, j + d)] = -b;
            r[(j, i + d)] = b;
        }
    }
    r
}

/// Projects a packed Hermitian matrix onto the PSD cone in place.
///
/// `basis` carries the eigenvector basis of the embedding between calls; pass
/// the basis from the previous projection of a nearby matrix to warm-start the
/// Jacobi sweeps. Returns the smallest eigenvalue before clamping.
pub fn project_psd_packed(p: &mut [f64], d: usize, basis: &mut DMatrix<f64>) -> Result<f64> {
    let n2 = 2 * d;
    let emb = packed_real_embedding(p, d);
    let start = if basis.shape() == (n2, n2) {
        basis.clone()
    } else {
        DMatrix::identity(n2, n2)
    };
    let e = jacobi_eigen_from(&emb, start)?;
    let min_eig = e.values.min();

    let positive: Vec<usize> = (0..n2).filter(|&k| e.values[k] > 0.0).collect();
    for i in 0..d {
        // Compress the reassembled embedding: A = (R11 + R22)/2, B = (R21 - R12)/2.
        let mut acc = 0.0;
        for &k in &positive {
            let q = e.vectors.column(k);
            acc += e.values[k] * (q[i] * q[i] + q[i + d] * q[i + d]);
        }
        p[i] = 0.5 * acc;
        for j in (i + 1)..d {
            let (ri, ii) = offdiag_index(d, i, j);
            let mut re = 0.0;
            let mut im = 0.0;
            for &k in &positive {
                let q = e.vectors.column(k);
                let lam = e.values[k];
                re += lam * (q[i] * q[j] + q[i + d] * q[j + d]);
                im += lam * (q[i + d] * q[j] - q[i] * q[j + d]);
            }
            p[ri] = SQRT_2 * 0.5 * re;
            p[ii] = SQRT_2 * 0.5 * im;
        }
    }
    *basis = e.vectors;
    Ok(min_eig)
}
