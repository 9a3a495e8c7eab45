//! Speaker-masked multi-head self-attention with a residual fusion layer.
//!
//! Each head computes `softmax(Q Kᵀ / √d_k + M) V` where `M` is 0 between
//! slots of the same speaker and −∞ otherwise. The concatenated heads go
//! through `W^O`; the result is concatenated with the input and projected
//! back to `D` columns by an affine fusion layer.

use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, NodeId};
use crate::param::{ParamId, ParamSet};
use crate::tensor::{Result, Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct MaskedAttentionLayer {
    pub hidden: usize,
    pub heads: usize,
    /// `D×D`; head `t` uses columns `t·d_k .. (t+1)·d_k`.
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
    /// `2D×D` fusion of `[H_1, MHSA(H_1)]`.
    pub fuse_w: ParamId,
    pub fuse_b: ParamId,
}

/// Output of [`MaskedAttentionLayer::forward`].
pub struct AttentionOutput {
    /// Fused `C×D` output.
    pub fused: NodeId,
    /// `C×D` multi-head output before fusion.
    pub attended: NodeId,
    /// One `C×C` weight matrix per head.
    pub weights: Vec<NodeId>,
}

impl MaskedAttentionLayer {
    pub fn new(hidden: usize, heads: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        if heads == 0 || !hidden.is_multiple_of(heads) {
            return Err(TensorError::Config(format!(
                "hidden size {hidden} is not divisible by {heads} heads"
            )));
        }
        let d = hidden;
        Ok(Self {
            hidden,
            heads,
            w_q: params.add_uniform("attention.w_q", &[d, d], d, rng),
            w_k: params.add_uniform("attention.w_k", &[d, d], d, rng),
            w_v: params.add_uniform("attention.w_v", &[d, d], d, rng),
            w_o: params.add_uniform("attention.w_o", &[d, d], d, rng),
            fuse_w: params.add_uniform("attention.fuse.w", &[2 * d, d], 2 * d, rng),
            fuse_b: params.add_zeros("attention.fuse.b", &[d]),
        })
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamSet, h: NodeId, mask: &Tensor) -> Result<AttentionOutput> {
        let dk = self.head_dim();
        let scale = 1.0 / (dk as f64).sqrt();
        let (wq, wk, wv, wo) = (
            g.param(params, self.w_q),
            g.param(params, self.w_k),
            g.param(params, self.w_v),
            g.param(params, self.w_o),
        );
        let q = g.matmul(h, wq)?;
        let k = g.matmul(h, wk)?;
        let v = g.matmul(h, wv)?;

        let mut heads = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for t in 0..self.heads {
            let qt = g.slice_cols(q, t * dk, dk)?;
            let kt = g.slice_cols(k, t * dk, dk)?;
            let vt = g.slice_cols(v, t * dk, dk)?;
            let ktt = g.transpose(kt)?;
            let scores = g.matmul(qt, ktt)?;
            let scores = g.scale(scores, scale)?;
            let a = g.masked_softmax(scores, mask)?;
            weights.push(a);
            heads.push(g.matmul(a, vt)?);
        }
        let cat = g.concat_cols(&heads)?;
        let attended = g.matmul(cat, wo)?;

        let both = g.concat_cols(&[h, attended])?;
        let fw = g.param(params, self.fuse_w);
        let fb = g.param(params, self.fuse_b);
        let fused = g.matmul(both, fw)?;
        let fused = g.add_row(fused, fb)?;
        Ok(AttentionOutput {
            fused,
            attended,
            weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    const NEG: f64 = f64::NEG_INFINITY;

    fn layer(d: usize, n: usize) -> (ParamSet, MaskedAttentionLayer) {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ps = ParamSet::new();
        let l = MaskedAttentionLayer::new(d, n, &mut ps, &mut rng).unwrap();
        (ps, l)
    }

    #[test]
    fn rejects_indivisible_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(MaskedAttentionLayer::new(6, 4, &mut ParamSet::new(), &mut rng).is_err());
    }

    #[test]
    fn diagonal_mask_with_identity_projections_passes_rows_through() {
        let (mut ps, l) = layer(4, 2);
        for id in [l.w_q, l.w_k, l.w_v, l.w_o] {
            ps.set_value(id, Tensor::identity(4)).unwrap();
        }
        let mut fuse = vec![0.0; 8 * 4];
        for i in 0..4 {
            fuse[i * 4 + i] = 1.0;
        }
        ps.set_value(l.fuse_w, Tensor::matrix(8, 4, fuse).unwrap()).unwrap();

        let h1 = Tensor::from_rows(&[
            vec![0.1, -0.2, 0.3, 0.4],
            vec![1.0, 0.5, -0.5, 0.0],
            vec![-0.3, 0.2, 0.9, -1.0],
        ])
        .unwrap();
        let mask = Tensor::from_rows(&[vec![0.0, NEG, NEG], vec![NEG, 0.0, NEG], vec![NEG, NEG, 0.0]]).unwrap();
        let mut g = Graph::new();
        let h = g.constant(h1.clone()).unwrap();
        let out = l.forward(&mut g, &ps, h, &mask).unwrap();
        assert!(g.value(out.attended).max_abs_diff(&h1) < 1e-15);
        assert!(g.value(out.fused).max_abs_diff(&h1) < 1e-15);
    }

    #[test]
    fn equal_logits_split_evenly() {
        let (mut ps, l) = layer(4, 2);
        ps.set_value(l.w_q, Tensor::zeros(&[4, 4])).unwrap();
        let mut g = Graph::new();
        let h = g
            .constant(Tensor::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![-1.0, 0.0, 1.0, 2.0]]).unwrap())
            .unwrap();
        let out = l.forward(&mut g, &ps, h, &Tensor::zeros(&[2, 2])).unwrap();
        for w in out.weights {
            assert!(g.value(w).data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        }
    }
}
