//! Analytic gradients against central finite differences, op by op and
//! through the whole stack.

use disentangle::autograd::{Graph, NodeId, UnaryKind};
use disentangle::corpus::{build_windows, detect_mentions, synth_generate, SynthConfig};
use disentangle::gradcheck::{fd_check, fd_check_with, FdOptions};
use disentangle::layercheck::{check_layers, LAYERS};
use disentangle::model::{Model, ModelConfig};
use disentangle::param::{ParamId, ParamSet};
use disentangle::structure::SynLstmCell;
use disentangle::tensor::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-3;
const SEEDS: std::ops::Range<u64> = 0..5;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Reduces `out` to a scalar through a fixed random weighting.
fn probe(g: &mut Graph, out: NodeId, weights: &Tensor) -> Result<NodeId> {
    let r = g.constant(weights.clone())?;
    let p = g.mul(out, r)?;
    g.sum(p)
}

type Build = fn(&mut Graph, &ParamSet, &[ParamId]) -> Result<NodeId>;

/// Checks one op: `shapes` are the parameter inputs, `build` maps them to
/// the op output, which is then probed.
fn check_op(name: &str, shapes: &[&[usize]], build: Build) {
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let ids: Vec<ParamId> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| ps.add(format!("in{i}"), random(&mut rng, s)))
            .collect();
        let out_shape = {
            let mut g = Graph::new();
            let out = build(&mut g, &ps, &ids).unwrap();
            g.value(out).shape().to_vec()
        };
        let weights = random(&mut rng, &out_shape);
        let report = fd_check(&mut ps, STEP, |g, p| {
            let out = build(g, p, &ids)?;
            probe(g, out, &weights)
        })
        .unwrap();
        assert!(
            report.passes(TOL),
            "{name}, seed {seed}: worst {:?}",
            report.worst()
        );
    }
}

fn p(g: &mut Graph, ps: &ParamSet, ids: &[ParamId], i: usize) -> NodeId {
    g.param(ps, ids[i])
}

#[test]
fn matmul_and_transpose() {
    check_op("matmul", &[&[3, 4], &[4, 2]], |g, ps, ids| {
        let (a, b) = (p(g, ps, ids, 0), p(g, ps, ids, 1));
        g.matmul(a, b)
    });
    check_op("transpose", &[&[3, 4], &[3, 2]], |g, ps, ids| {
        let (a, b) = (p(g, ps, ids, 0), p(g, ps, ids, 1));
        let t = g.transpose(a)?;
        g.matmul(t, b)
    });
}

#[test]
fn elementwise_binary_ops() {
    check_op("add", &[&[2, 3], &[2, 3]], |g, ps, ids| {
        let (a, b) = (p(g, ps, ids, 0), p(g, ps, ids, 1));
        g.add(a, b)
    });
    check_op("sub", &[&[2, 3], &[2, 3]], |g, ps, ids| {
        let (a, b) = (p(g, ps, ids, 0), p(g, ps, ids, 1));
        g.sub(a, b)
    });
    check_op("mul", &[&[2, 3], &[2, 3]], |g, ps, ids| {
        let (a, b) = (p(g, ps, ids, 0), p(g, ps, ids, 1));
        g.mul(a, b)
    });
    check_op("add_row", &[&[4, 3], &[3]], |g, ps, ids| {
        let (a, b) = (p(g, ps, ids, 0), p(g, ps, ids, 1));
        g.add_row(a, b)
    });
    check_op("scale", &[&[2, 2]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        g.scale(a, -1.7)
    });
}

#[test]
fn nonlinearities() {
    check_op("tanh", &[&[3, 3]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        g.tanh(a)
    });
    check_op("sigmoid", &[&[3, 3]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        g.sigmoid(a)
    });
    check_op("relu", &[&[3, 3]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        g.unary(UnaryKind::Relu, a)
    });
}

#[test]
fn masked_softmax_and_cross_entropy() {
    check_op("masked_softmax", &[&[3, 4]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        let ninf = f64::NEG_INFINITY;
        let mask = Tensor::from_rows(&[
            vec![0.0, ninf, 0.0, 0.0],
            vec![ninf, 0.0, ninf, ninf],
            vec![0.0, 0.0, 0.0, 0.0],
        ])?;
        g.masked_softmax(a, &mask)
    });
    check_op("cross_entropy", &[&[5]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        let l = g.cross_entropy(a, 3)?;
        g.scale(l, 1.0)
    });
}

#[test]
fn shape_ops() {
    check_op("concat_cols", &[&[3, 2], &[3, 1]], |g, ps, ids| {
        let (a, b) = (p(g, ps, ids, 0), p(g, ps, ids, 1));
        g.concat_cols(&[a, b, a])
    });
    check_op("slice_cols", &[&[3, 5]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        let s = g.slice_cols(a, 1, 3)?;
        let t = g.slice_cols(a, 2, 2)?;
        g.concat_cols(&[s, t])
    });
    check_op("row_and_stack", &[&[4, 3]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        let r0 = g.row(a, 3)?;
        let r1 = g.row(a, 1)?;
        g.stack_rows(&[r0, r1, r0])
    });
    check_op("broadcast_rows", &[&[1, 3]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        g.broadcast_rows(a, 4)
    });
    check_op("mask_rows", &[&[3, 2]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        g.mask_rows(a, &[true, false, true])
    });
    check_op("reshape_and_sum", &[&[2, 3]], |g, ps, ids| {
        let a = p(g, ps, ids, 0);
        let r = g.reshape(a, &[3, 2])?;
        let s = g.sum(r)?;
        let sq = g.mul(s, s)?;
        g.reshape(sq, &[1])
    });
}

#[test]
fn embedding_mean() {
    check_op("embed_mean", &[&[6, 3]], |g, ps, ids| {
        g.embed_mean(ps, ids[0], vec![vec![0, 2, 2], vec![], vec![5], vec![1, 4]])
    });
}

#[test]
fn synlstm_cell_parameters() {
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let cell = SynLstmCell::new("cell", 3, 2, &mut ps, &mut rng);
        for id in cell.param_ids() {
            let shape = ps.value(id).shape().to_vec();
            ps.set_value(id, random(&mut rng, &shape)).unwrap();
        }
        let (x1, x2) = (random(&mut rng, &[4, 3]), random(&mut rng, &[4, 3]));
        let weights = random(&mut rng, &[1, 2]);
        let report = fd_check(&mut ps, STEP, |g, p| {
            let a = g.constant(x1.clone())?;
            let b = g.constant(x2.clone())?;
            let hs = cell.run(g, p, a, b, &[0, 1, 2, 3])?;
            probe(g, *hs.last().unwrap(), &weights)
        })
        .unwrap();
        assert_eq!(report.entries.len(), ps.total_values());
        assert!(report.passes(TOL), "seed {seed}: {:?}", report.worst());
    }
}

fn tiny_model(seed: u64) -> (Model, disentangle::corpus::Dialogue) {
    let model = Model::new(ModelConfig {
        window: 4,
        hidden: 6,
        heads: 2,
        recurrent: 3,
        hash_buckets: 16,
        max_tokens: 8,
        seed,
        ..Default::default()
    })
    .unwrap();
    let d = synth_generate(&SynthConfig {
        n_utterances: 10,
        n_users: 3,
        n_threads: 2,
        seed,
        ..Default::default()
    })
    .unwrap()
    .dialogue;
    (model, d)
}

#[test]
fn training_loss_gradient_reaches_bucket_embeddings() {
    for seed in SEEDS {
        let (mut model, d) = tiny_model(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in model.params.iter_mut() {
            let shape = p.value.shape().to_vec();
            p.value = random(&mut rng, &shape);
        }
        let windows = build_windows(&d, &detect_mentions(&d, 4), 4);
        let w = &windows[7];
        let mut params = std::mem::take(&mut model.params);
        let report = fd_check(&mut params, STEP, |g, p| {
            let logits = model.forward_with(p, g, w, &d).map_err(|e| match e {
                disentangle::Error::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            g.cross_entropy(logits.logits, w.gold_slot)
        })
        .unwrap();
        let embedding = report.entries.iter().filter(|e| e.param.contains("embedding")).count();
        assert!(embedding > 0);
        assert!(report.passes(TOL), "seed {seed}: {:?}", report.worst());
    }
}

#[test]
fn every_layer_and_the_stack_pass_across_seeds() {
    for seed in SEEDS {
        let checks = check_layers(seed, FdOptions::default()).unwrap();
        let names: Vec<_> = checks.iter().map(|c| c.layer).collect();
        assert_eq!(names, LAYERS);
        for c in checks {
            assert!(c.report.passes(TOL), "{} seed {seed}: {:?}", c.layer, c.report.worst());
        }
    }
}

#[test]
fn a_wrong_sign_is_caught() {
    let opts = FdOptions {
        flip_analytic_sign: true,
        ..FdOptions::default()
    };
    let checks = check_layers(1, opts).unwrap();
    assert!(checks.iter().all(|c| !c.report.passes(TOL)));
    let mut ps = ParamSet::new();
    ps.add("x", Tensor::vector(vec![0.3, -0.2]).unwrap());
    let r = fd_check_with(&mut ps, opts, |g, p| {
        let x = g.param(p, p.id_of("x").unwrap());
        let y = g.mul(x, x)?;
        g.sum(y)
    })
    .unwrap();
    assert!(!r.passes(TOL));
}

#[test]
fn backward_is_bitwise_deterministic() {
    let (mut model, d) = tiny_model(9);
    let windows = build_windows(&d, &detect_mentions(&d, 4), 4);
    let mut grads = Vec::new();
    for _ in 0..2 {
        model.params.zero_grad();
        for w in &windows {
            let mut g = Graph::new();
            let loss = model.window_loss(&mut g, w, &d).unwrap();
            g.backward(loss, &mut model.params).unwrap();
        }
        let flat: Vec<u64> = model
            .params
            .iter()
            .flat_map(|p| p.gradient.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect();
        grads.push(flat);
    }
    assert_eq!(grads[0], grads[1]);
    assert!(grads[0].iter().any(|&b| f64::from_bits(b) != 0.0));
}
