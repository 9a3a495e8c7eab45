//! Central finite-difference verification of analytic gradients.

use crate::autograd::{Graph, NodeId};
use crate::param::ParamSet;
use crate::tensor::{Result, TensorError};

/// Relative errors are measured against `max(|analytic|, |numeric|, floor)`
/// so coordinates with vanishing gradient are compared absolutely.
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub step: f64,
    pub floor: f64,
    /// Check at most this many evenly spaced coordinates per parameter.
    pub max_coords_per_param: Option<usize>,
    /// Negates the analytic gradient before comparison. Harness self-test only.
    pub flip_analytic_sign: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            floor: DEFAULT_FLOOR,
            max_coords_per_param: None,
            flip_analytic_sign: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct FdReport {
    /// Sorted by descending relative error.
    pub entries: Vec<FdEntry>,
}

impl FdReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.rel_error)
    }

    pub fn worst(&self) -> Option<&FdEntry> {
        self.entries.first()
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }
}

/// Runs `forward` once with backward to get analytic gradients, then
/// perturbs every coordinate of every parameter by ±`step`.
pub fn fd_check<F>(params: &mut ParamSet, step: f64, forward: F) -> Result<FdReport>
where
    F: FnMut(&mut Graph, &ParamSet) -> Result<NodeId>,
{
    fd_check_with(
        params,
        FdOptions {
            step,
            ..FdOptions::default()
        },
        forward,
    )
}

pub fn fd_check_with<F>(params: &mut ParamSet, opts: FdOptions, mut forward: F) -> Result<FdReport>
where
    F: FnMut(&mut Graph, &ParamSet) -> Result<NodeId>,
{
    if opts.step.is_nan() || opts.step <= 0.0 {
        return Err(TensorError::Config(format!("finite-difference step must be positive, got {}", opts.step)));
    }
    params.zero_grad();
    let mut graph = Graph::new();
    let loss = forward(&mut graph, params)?;
    graph.backward(loss, params)?;
    drop(graph);

    let mut eval = |params: &ParamSet| -> Result<f64> {
        let mut g = Graph::new();
        let l = forward(&mut g, params)?;
        let v = g.value(l).data()[0];
        if !v.is_finite() {
            return Err(TensorError::NonFinite { op: "fd_check" });
        }
        Ok(v)
    };

    let mut entries = Vec::new();
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let n = params.get(id).value.len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < n => (0..k).map(|i| i * n / k).collect(),
            _ => (0..n).collect(),
        };
        for idx in coords {
            let sign = if opts.flip_analytic_sign { -1.0 } else { 1.0 };
            let analytic = sign * params.get(id).gradient.data()[idx];
            let orig = params.get(id).value.data()[idx];

            params.get_mut(id).value.data_mut()[idx] = orig + opts.step;
            let plus = eval(params);
            params.get_mut(id).value.data_mut()[idx] = orig - opts.step;
            let minus = eval(params);
            params.get_mut(id).value.data_mut()[idx] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.step);

            let scale = analytic.abs().max(numeric.abs()).max(opts.floor);
            entries.push(FdEntry {
                param: params.get(id).name.clone(),
                index: idx,
                analytic,
                numeric,
                rel_error: (analytic - numeric).abs() / scale,
            });
        }
    }
    entries.sort_by(|a, b| b.rel_error.total_cmp(&a.rel_error));
    Ok(FdReport { entries })
}
