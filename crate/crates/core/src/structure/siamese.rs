//! Siamese comparison of every candidate pair with the self pair.
//!
//! For slot `j` the feature row is `[p_ii, p_ij, p_ii ⊙ p_ij, p_ii − p_ij]`,
//! where `p_ii` is the last row of `H_4`. One affine map turns each row into
//! a logit; padded slots are pushed to the mask sentinel.

use crate::autograd::{Graph, NodeId, MASK_SENTINEL};
use crate::param::{ParamId, ParamSet};
use crate::tensor::{Result, Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct SiameseScorer {
    /// Width of one `H_4` row, `2·D_r`.
    pub input: usize,
    /// `4·input × 1`.
    pub w: ParamId,
    pub b: ParamId,
}

impl SiameseScorer {
    /// The classifier starts at zero, so an untrained model scores every
    /// candidate equally.
    pub fn new(input: usize, params: &mut ParamSet) -> Self {
        Self {
            input,
            w: params.add_zeros("scorer.w", &[4 * input, 1]),
            b: params.add_zeros("scorer.b", &[1]),
        }
    }

    /// `C×8D_r` feature matrix.
    pub fn features(&self, g: &mut Graph, h4: NodeId) -> Result<NodeId> {
        let (c, width) = g.value(h4).dims2();
        if width != self.input {
            return Err(TensorError::Shape {
                op: "siamese",
                left: vec![c, width],
                right: vec![c, self.input],
            });
        }
        let own = g.row(h4, c - 1)?;
        let own = g.broadcast_rows(own, c)?;
        let prod = g.mul(own, h4)?;
        let diff = g.sub(own, h4)?;
        g.concat_cols(&[own, h4, prod, diff])
    }

    /// Logits of shape `[C]`; `keep[j] == false` marks a padded slot.
    pub fn forward(&self, g: &mut Graph, params: &ParamSet, h4: NodeId, keep: &[bool]) -> Result<NodeId> {
        let c = g.value(h4).rows();
        if keep.len() != c {
            return Err(TensorError::Shape {
                op: "siamese",
                left: vec![c],
                right: vec![keep.len()],
            });
        }
        let f = self.features(g, h4)?;
        let w = g.param(params, self.w);
        let b = g.param(params, self.b);
        let z = g.matmul(f, w)?;
        let z = g.add_row(z, b)?;
        if keep.iter().all(|&k| k) {
            return g.reshape(z, &[c]);
        }
        let z = g.mask_rows(z, keep)?;
        let z = g.reshape(z, &[c])?;
        let pads: Vec<f64> = keep.iter().map(|&k| if k { 0.0 } else { MASK_SENTINEL }).collect();
        let pads = g.constant(Tensor::vector(pads)?)?;
        g.add(z, pads)
    }
}
