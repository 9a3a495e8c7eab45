//! Single-relation graph convolution over reference edges:
//! `h_i' = ReLU(Σ_{j∈N_i} W_r h_j / c_i + W_0 h_i)` with `c_i = max(1, |N_i|)`.
//!
//! Matrices are stored input-major (`D_in × D_out`) and applied on the right
//! of row vectors.

use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, NodeId};
use crate::param::{ParamId, ParamSet};
use crate::tensor::{Result, Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct RgcnLayer {
    pub hidden: usize,
    pub w_rel: ParamId,
    pub w_self: ParamId,
}

/// Row-normalised adjacency: row `i` holds `1/c_i` at each neighbour of `i`.
pub fn normalized_adjacency(adj: &[bool], n: usize) -> Result<Tensor> {
    if adj.len() != n * n {
        return Err(TensorError::Shape {
            op: "normalized_adjacency",
            left: vec![n, n],
            right: vec![adj.len()],
        });
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let row = &adj[i * n..(i + 1) * n];
        let deg = row.iter().filter(|&&b| b).count().max(1) as f64;
        for (j, &b) in row.iter().enumerate() {
            if b {
                data[i * n + j] = 1.0 / deg;
            }
        }
    }
    Tensor::new(&[n, n], data)
}

impl RgcnLayer {
    pub fn new(hidden: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Self {
        Self {
            hidden,
            w_rel: params.add_uniform("rgcn.w_rel", &[hidden, hidden], hidden, rng),
            w_self: params.add_uniform("rgcn.w_self", &[hidden, hidden], hidden, rng),
        }
    }

    /// `adj` is row-major `C×C`; self-edges are ignored.
    pub fn forward(&self, g: &mut Graph, params: &ParamSet, h: NodeId, adj: &[bool]) -> Result<NodeId> {
        let n = g.value(h).rows();
        if adj.len() != n * n {
            return Err(TensorError::Shape {
                op: "rgcn",
                left: vec![n, n],
                right: vec![adj.len()],
            });
        }
        let mut adj = adj.to_vec();
        for i in 0..n {
            adj[i * n + i] = false;
        }
        let wr = g.param(params, self.w_rel);
        let w0 = g.param(params, self.w_self);
        let self_term = g.matmul(h, w0)?;
        let pre = if adj.iter().any(|&b| b) {
            let a = g.constant(normalized_adjacency(&adj, n)?)?;
            let agg = g.matmul(a, h)?;
            let rel = g.matmul(agg, wr)?;
            g.add(rel, self_term)?
        } else {
            self_term
        };
        g.relu(pre)
    }
}
