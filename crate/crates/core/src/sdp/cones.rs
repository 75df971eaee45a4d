use nalgebra::DMatrix;

use super::{Block, BlockKind};
use crate::error::Result;
use crate::linalg::packing::project_psd_packed;

/// Euclidean projection of `(v, t)` onto `{(v, t) : ‖v‖ ≤ t}`.
pub fn project_soc(v: &[f64], t: f64) -> (Vec<f64>, f64) {
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nv <= t {
        (v.to_vec(), t)
    } else if nv <= -t {
        (vec![0.0; v.len()], 0.0)
    } else {
        let alpha = 0.5 * (nv + t);
        (v.iter().map(|x| alpha * x / nv).collect(), alpha)
    }
}

pub fn project_nonneg(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

fn project_soc_in_place(block: &mut [f64]) {
    let t = block[0];
    let nv = block[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nv <= t {
        return;
    }
    if nv <= -t {
        block.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let alpha = 0.5 * (nv + t);
    block[0] = alpha;
    block[1..].iter_mut().for_each(|x| *x = alpha * *x / nv);
}

/// Projection onto the product cone, with one cached eigenbasis per PSD block.
pub(crate) struct ConeProjector {
    blocks: Vec<(Block, usize)>,
    bases: Vec<DMatrix<f64>>,
    /// Smallest pre-projection eigenvalue seen per PSD block in the last call.
    pub min_eigs: Vec<f64>,
}

impl ConeProjector {
    pub fn new(blocks: &[Block]) -> Self {
        let mut off = 0;
        let mut out = Vec::with_capacity(blocks.len());
        for b in blocks {
            out.push((*b, off));
            off += b.len();
        }
        let n_psd = blocks.iter().filter(|b| b.kind == BlockKind::Psd).count();
        Self {
            blocks: out,
            bases: vec![DMatrix::zeros(0, 0); n_psd],
            min_eigs: vec![0.0; n_psd],
        }
    }

    pub fn project(&mut self, x: &mut [f64]) -> Result<()> {
        let mut psd_idx = 0;
        for &(blk, off) in &self.blocks {
            let seg = &mut x[off..off + blk.len()];
            match blk.kind {
                BlockKind::Free => {}
                BlockKind::Nonneg => project_nonneg(seg),
                BlockKind::Soc => project_soc_in_place(seg),
                BlockKind::Psd => {
                    self.min_eigs[psd_idx] = project_psd_packed(seg, blk.dim, &mut self.bases[psd_idx])?;
                    psd_idx += 1;
                }
            }
        }
        Ok(())
    }
}
