//! Recurrent cell with two input streams and one input gate per stream.
//!
//! ```text
//! f   = σ(W_f x1 + U_f h + Q_f x2 + b_f)
//! o   = σ(W_o x1 + U_o h + Q_o x2 + b_o)
//! i1  = σ(W_i1 x1 + U_i1 h + b_i1)
//! i2  = σ(W_i2 x2 + U_i2 h + b_i2)
//! c1  = tanh(W_k x1 + U_k h + b_k)
//! c2  = tanh(W_p x2 + U_p h + b_p)
//! c'  = f ⊙ c + i1 ⊙ c1 + i2 ⊙ c2
//! h'  = o ⊙ tanh(c')
//! ```
//!
//! Weights are stored input-major and applied to row vectors.
//! [`SynLstmCell::step`] follows the equations gate by gate;
//! [`bi_synlstm`] runs whole sequences with the input projections batched
//! up front, and is tested against the step-wise form.

use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, NodeId};
use crate::param::{ParamId, ParamSet};
use crate::tensor::Result;

#[derive(Debug, Clone, Copy)]
pub struct GateParams {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone)]
pub struct SynLstmCell {
    pub input: usize,
    pub hidden: usize,
    pub forget: GateParams,
    pub output: GateParams,
    pub input1: GateParams,
    pub input2: GateParams,
    pub cand1: GateParams,
    pub cand2: GateParams,
    /// Second-stream terms of the forget and output gates.
    pub q_forget: ParamId,
    pub q_output: ParamId,
}

impl SynLstmCell {
    pub fn new(prefix: &str, input: usize, hidden: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Self {
        let mut gate = |name: &str| GateParams {
            w: params.add_uniform(format!("{prefix}.w_{name}"), &[input, hidden], input, rng),
            u: params.add_uniform(format!("{prefix}.u_{name}"), &[hidden, hidden], hidden, rng),
            b: params.add_zeros(format!("{prefix}.b_{name}"), &[hidden]),
        };
        let forget = gate("f");
        let output = gate("o");
        let input1 = gate("i1");
        let input2 = gate("i2");
        let cand1 = gate("k");
        let cand2 = gate("p");
        let q_forget = params.add_uniform(format!("{prefix}.q_f"), &[input, hidden], input, rng);
        let q_output = params.add_uniform(format!("{prefix}.q_o"), &[input, hidden], input, rng);
        Self {
            input,
            hidden,
            forget,
            output,
            input1,
            input2,
            cand1,
            cand2,
            q_forget,
            q_output,
        }
    }

    /// Every parameter of the cell, weights first.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let gates = [self.forget, self.output, self.input1, self.input2, self.cand1, self.cand2];
        let mut ids: Vec<ParamId> = gates.iter().map(|g| g.w).collect();
        ids.extend(gates.iter().map(|g| g.u));
        ids.extend([self.q_forget, self.q_output]);
        ids.extend(gates.iter().map(|g| g.b));
        ids
    }

    /// One time step. `x1`, `x2` are `1×D`; `h`, `c` are `1×D_r`.
    pub fn step(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        x1: NodeId,
        x2: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let affine = |g: &mut Graph, gate: GateParams, x: NodeId, extra: Option<(ParamId, NodeId)>| {
            let w = g.param(params, gate.w);
            let u = g.param(params, gate.u);
            let b = g.param(params, gate.b);
            let wx = g.matmul(x, w)?;
            let uh = g.matmul(h, u)?;
            let mut z = g.add(wx, uh)?;
            if let Some((q, x2)) = extra {
                let q = g.param(params, q);
                let qx = g.matmul(x2, q)?;
                z = g.add(z, qx)?;
            }
            g.add_row(z, b)
        };
        let f = affine(g, self.forget, x1, Some((self.q_forget, x2)))?;
        let f = g.sigmoid(f)?;
        let o = affine(g, self.output, x1, Some((self.q_output, x2)))?;
        let o = g.sigmoid(o)?;
        let i1 = affine(g, self.input1, x1, None)?;
        let i1 = g.sigmoid(i1)?;
        let i2 = affine(g, self.input2, x2, None)?;
        let i2 = g.sigmoid(i2)?;
        let c1 = affine(g, self.cand1, x1, None)?;
        let c1 = g.tanh(c1)?;
        let c2 = affine(g, self.cand2, x2, None)?;
        let c2 = g.tanh(c2)?;

        let keep = g.mul(f, c)?;
        let add1 = g.mul(i1, c1)?;
        let add2 = g.mul(i2, c2)?;
        let c_new = g.add(keep, add1)?;
        let c_new = g.add(c_new, add2)?;
        let tc = g.tanh(c_new)?;
        let h_new = g.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    /// Runs the cell over `x1`, `x2` (both `T×D`) in the given slot order,
    /// from zero states. Returns one `1×D_r` hidden state per visited slot,
    /// in visiting order.
    pub fn run(&self, g: &mut Graph, params: &ParamSet, x1: NodeId, x2: NodeId, order: &[usize]) -> Result<Vec<NodeId>> {
        let r = self.hidden;
        // Input projections for all slots at once, gate order [f, o, i1, i2, k, p].
        let w1 = [self.forget.w, self.output.w, self.input1.w, self.cand1.w].map(|id| g.param(params, id));
        let w2 = [self.q_forget, self.q_output, self.input2.w, self.cand2.w].map(|id| g.param(params, id));
        let w1 = g.concat_cols(&w1)?;
        let w2 = g.concat_cols(&w2)?;
        let a1 = g.matmul(x1, w1)?;
        let a2 = g.matmul(x2, w2)?;
        let fo1 = g.slice_cols(a1, 0, 2 * r)?;
        let fo2 = g.slice_cols(a2, 0, 2 * r)?;
        let fo = g.add(fo1, fo2)?;
        let i1 = g.slice_cols(a1, 2 * r, r)?;
        let i2 = g.slice_cols(a2, 2 * r, r)?;
        let k = g.slice_cols(a1, 3 * r, r)?;
        let p = g.slice_cols(a2, 3 * r, r)?;
        let pre = g.concat_cols(&[fo, i1, i2, k, p])?;
        let gates = [self.forget, self.output, self.input1, self.input2, self.cand1, self.cand2];
        let biases: Vec<NodeId> = gates.iter().map(|gp| g.param(params, gp.b)).collect();
        let bias = g.concat_cols(&biases)?;
        let pre = g.add_row(pre, bias)?;
        let us: Vec<NodeId> = gates.iter().map(|gp| g.param(params, gp.u)).collect();
        let u = g.concat_cols(&us)?;

        let mut out = Vec::with_capacity(order.len());
        let mut state: Option<(NodeId, NodeId)> = None;
        for &t in order {
            let mut z = g.row(pre, t)?;
            if let Some((h, _)) = state {
                let uh = g.matmul(h, u)?;
                z = g.add(z, uh)?;
            }
            let sig = g.slice_cols(z, 0, 4 * r)?;
            let sig = g.sigmoid(sig)?;
            let cand = g.slice_cols(z, 4 * r, 2 * r)?;
            let cand = g.tanh(cand)?;
            let f = g.slice_cols(sig, 0, r)?;
            let o = g.slice_cols(sig, r, r)?;
            let gi1 = g.slice_cols(sig, 2 * r, r)?;
            let gi2 = g.slice_cols(sig, 3 * r, r)?;
            let c1 = g.slice_cols(cand, 0, r)?;
            let c2 = g.slice_cols(cand, r, r)?;
            let a = g.mul(gi1, c1)?;
            let b = g.mul(gi2, c2)?;
            let mut c = g.add(a, b)?;
            if let Some((_, c_prev)) = state {
                let keep = g.mul(f, c_prev)?;
                c = g.add(c, keep)?;
            }
            let tc = g.tanh(c)?;
            let h = g.mul(o, tc)?;
            out.push(h);
            state = Some((h, c));
        }
        Ok(out)
    }
}

/// Bidirectional pass: row `j` of the `C×2D_r` result is
/// `[forward h at slot j ; backward h at slot j]`.
pub fn bi_synlstm(
    g: &mut Graph,
    params: &ParamSet,
    x1: NodeId,
    x2: NodeId,
    fwd: &SynLstmCell,
    bwd: &SynLstmCell,
) -> Result<NodeId> {
    let c = g.value(x1).rows();
    let forward_order: Vec<usize> = (0..c).collect();
    let backward_order: Vec<usize> = (0..c).rev().collect();
    let hf = fwd.run(g, params, x1, x2, &forward_order)?;
    let mut hb = bwd.run(g, params, x1, x2, &backward_order)?;
    hb.reverse();
    let hf = g.stack_rows(&hf)?;
    let hb = g.stack_rows(&hb)?;
    g.concat_cols(&[hf, hb])
}
