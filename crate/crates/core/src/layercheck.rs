//! Finite-difference checks of every layer and of the composed stack on a
//! small random configuration.
//!
//! Each layer is driven with random inputs and reduced to a scalar through a
//! fixed random probe, `Σ out ⊙ R`, so every output coordinate contributes.
//! The composed check uses the real training loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, NodeId};
use crate::corpus::{build_windows, detect_mentions, synth_generate, SynthConfig};
use crate::encoder::WindowEncoder;
use crate::error::{Error, Result};
use crate::gradcheck::{fd_check_with, FdOptions, FdReport};
use crate::model::{Model, ModelConfig};
use crate::param::ParamSet;
use crate::structure::bi_synlstm;
use crate::tensor::{Tensor, TensorError};

pub const LAYERS: [&str; 6] = ["encoder", "attention", "rgcn", "synlstm", "siamese", "stack"];

#[derive(Debug, Clone)]
pub struct LayerCheck {
    pub layer: &'static str,
    pub report: FdReport,
}

/// The configuration the checks run at.
pub fn check_config(seed: u64) -> ModelConfig {
    ModelConfig {
        window: 5,
        hidden: 8,
        heads: 2,
        recurrent: 4,
        hash_buckets: 32,
        max_tokens: 16,
        seed,
        ..Default::default()
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("positive shape")
}

fn probe(g: &mut Graph, out: NodeId, rng: &mut ChaCha8Rng) -> crate::tensor::Result<NodeId> {
    let r = g.constant(random(g.value(out).shape(), rng))?;
    let prod = g.mul(out, r)?;
    g.sum(prod)
}

fn flat(e: Error) -> TensorError {
    match e {
        Error::Tensor(t) => t,
        other => TensorError::Config(other.to_string()),
    }
}

/// Runs all checks for one seed. Parameters are redrawn from
/// uniform(−0.5, 0.5) so biases and the zero-initialised scorer are
/// exercised too.
pub fn check_layers(seed: u64, opts: FdOptions) -> Result<Vec<LayerCheck>> {
    let cfg = check_config(seed);
    let mut model = Model::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for p in model.params.iter_mut() {
        p.value = random(p.value.shape(), &mut rng).map(|v| 0.5 * v);
    }

    let synth = synth_generate(&SynthConfig {
        n_utterances: 12,
        n_users: 3,
        n_threads: 2,
        mention_prob: 1.0,
        seed,
        ..Default::default()
    })?;
    let d = synth.dialogue;
    let windows = build_windows(&d, &detect_mentions(&d, cfg.window), cfg.window);
    let w = windows.last().expect("non-empty dialogue").clone();
    let c = cfg.window;
    let dim = cfg.hidden;

    let x1 = random(&[c, dim], &mut rng);
    let x2 = random(&[c, dim], &mut rng);
    let h4 = random(&[c, 2 * cfg.recurrent], &mut rng);
    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5);
    let mut mask = vec![0.0; c * c];
    for p in 0..c {
        for q in 0..c {
            if p != q && mask_rng.gen_bool(0.5) {
                mask[p * c + q] = f64::NEG_INFINITY;
            }
        }
    }
    let mask = Tensor::new(&[c, c], mask)?;
    let adj: Vec<bool> = (0..c * c).map(|i| i % (c + 1) != 0 && mask_rng.gen_bool(0.4)).collect();
    let keep: Vec<bool> = (0..c).map(|j| j != 0).collect();

    let mut params: ParamSet = std::mem::take(&mut model.params);
    let m = &model;
    let probe_seed = seed.wrapping_add(1);
    let mut out = Vec::new();

    for &layer in &LAYERS {
        let report = fd_check_with(&mut params, opts, |g, p| {
            let mut prng = ChaCha8Rng::seed_from_u64(probe_seed);
            let y = match layer {
                "encoder" => m.encoder.encode_window(g, p, &w, &d)?,
                "attention" => {
                    let x = g.constant(x1.clone())?;
                    m.attention.forward(g, p, x, &mask)?.fused
                }
                "rgcn" => {
                    let x = g.constant(x1.clone())?;
                    m.rgcn.forward(g, p, x, &adj)?
                }
                "synlstm" => {
                    let a = g.constant(x1.clone())?;
                    let b = g.constant(x2.clone())?;
                    bi_synlstm(g, p, a, b, &m.forward_cell, &m.backward_cell)?
                }
                "siamese" => {
                    // Pad logits sit at the sentinel; a linear probe over
                    // them would swamp the differences, so score with the loss.
                    let h = g.constant(h4.clone())?;
                    let logits = m.scorer.forward(g, p, h, &keep)?;
                    return g.cross_entropy(logits, 2);
                }
                _ => {
                    let logits = m.forward_with(p, g, &w, &d).map_err(flat)?.logits;
                    return g.cross_entropy(logits, w.gold_slot);
                }
            };
            probe(g, y, &mut prng)
        })?;
        out.push(LayerCheck { layer, report });
    }
    model.params = params;
    Ok(out)
}
