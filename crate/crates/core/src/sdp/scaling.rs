//! Ruiz-style diagonal equilibration that respects cone structure: rows are
//! scaled freely, columns uniformly within each SOC or PSD block.

use nalgebra::{DMatrix, DVector};

use super::{Block, BlockKind};

pub(crate) struct Scaling {
    /// Row scaling `D`.
    pub row: DVector<f64>,
    /// Column scaling `E`; `x = E x̃`.
    pub col: DVector<f64>,
    /// Objective scaling `σ`.
    pub cost: f64,
}

/// Returns the scaling and the scaled data `(D A E, D b, σ E c)`.
pub(crate) fn equilibrate(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    blocks: &[Block],
    passes: usize,
) -> (Scaling, DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let (m, n) = a.shape();
    let mut row = DVector::from_element(m, 1.0);
    let mut col = DVector::from_element(n, 1.0);
    let mut s = a.clone();

    for _ in 0..passes {
        let mut dr = DVector::from_element(m, 1.0);
        for i in 0..m {
            let nrm = s.row(i).amax();
            if nrm > 0.0 {
                dr[i] = 1.0 / nrm.sqrt();
            }
        }
        let mut dc = DVector::from_element(n, 1.0);
        let mut off = 0;
        for blk in blocks {
            let len = blk.len();
            match blk.kind {
                BlockKind::Free | BlockKind::Nonneg => {
                    for j in off..off + len {
                        let nrm = s.column(j).amax();
                        if nrm > 0.0 {
                            dc[j] = 1.0 / nrm.sqrt();
                        }
                    }
                }
                BlockKind::Soc | BlockKind::Psd => {
                    let nrm = (off..off + len).map(|j| s.column(j).amax()).fold(0.0, f64::max);
                    if nrm > 0.0 {
                        for j in off..off + len {
                            dc[j] = 1.0 / nrm.sqrt();
                        }
                    }
                }
            }
            off += len;
        }
        for i in 0..m {
            for j in 0..n {
                s[(i, j)] *= dr[i] * dc[j];
            }
        }
        row.component_mul_assign(&dr);
        col.component_mul_assign(&dc);
    }

    let bs = b.component_mul(&row);
    let mut cs = c.component_mul(&col);
    let cmax = cs.amax();
    let cost = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
    cs *= cost;
    (Scaling { row, col, cost }, s, bs, cs)
}
