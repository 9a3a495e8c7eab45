//! Training, prediction and clustering properties.

use std::collections::BTreeSet;

use disentangle::corpus::{synth_generate, Dialogue, SynthConfig};
use disentangle::metrics::Partition;
use disentangle::model::{Model, ModelConfig};
use disentangle::pipeline::{cluster, links_of, predict, train, LinkPrediction, TrainConfig};
use proptest::prelude::*;

fn config(seed: u64) -> ModelConfig {
    ModelConfig {
        window: 8,
        hidden: 8,
        heads: 2,
        recurrent: 4,
        hash_buckets: 128,
        seed,
        ..Default::default()
    }
}

fn corpus(seed: u64, n: usize) -> Dialogue {
    synth_generate(&SynthConfig {
        n_utterances: n,
        seed,
        ..Default::default()
    })
    .unwrap()
    .dialogue
}

fn train_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 2,
        window: 8,
        lr: 5e-3,
        seed,
        ..Default::default()
    }
}

fn gold_predictions(d: &Dialogue) -> Vec<LinkPrediction> {
    d.gold_links()
        .unwrap()
        .iter()
        .map(|(&child, &parent)| LinkPrediction {
            child,
            parent,
            confidence: 1.0,
        })
        .collect()
}

#[test]
fn training_is_bitwise_reproducible() {
    let d = [corpus(1, 60)];
    let run = || {
        let mut m = Model::new(config(4)).unwrap();
        let report = train(&d, &mut m, &train_cfg(2)).unwrap();
        let values: Vec<u64> = m.params.iter().flat_map(|p| p.value.data().to_vec()).map(f64::to_bits).collect();
        let losses: Vec<u64> = report.trace.iter().map(|e| e.loss.to_bits()).collect();
        (values, losses)
    };
    assert_eq!(run(), run());
}

#[test]
fn different_shuffle_seed_gives_different_weights() {
    let d = [corpus(1, 60)];
    let weights = |seed| {
        let mut m = Model::new(config(4)).unwrap();
        train(&d, &mut m, &train_cfg(seed)).unwrap();
        m.params.iter().flat_map(|p| p.value.data().to_vec()).collect::<Vec<f64>>()
    };
    assert_ne!(weights(0), weights(1));
}

#[test]
fn prediction_is_deterministic_from_a_checkpoint() {
    let d = corpus(3, 50);
    let mut m = Model::new(config(5)).unwrap();
    train(std::slice::from_ref(&d), &mut m, &train_cfg(0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let unlabeled = d.without_annotations();
    let a = predict(&unlabeled, &Model::load(&path).unwrap()).unwrap();
    let b = predict(&unlabeled, &Model::load(&path).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, predict(&unlabeled, &m).unwrap());
    for p in &a {
        assert!(p.parent <= p.child);
        assert!((0.0..=1.0).contains(&p.confidence));
    }
}

#[test]
fn resuming_with_another_window_width_is_rejected() {
    let d = [corpus(3, 30)];
    let mut m = Model::new(config(0)).unwrap();
    let cfg = TrainConfig {
        window: 12,
        ..train_cfg(0)
    };
    assert!(train(&d, &mut m, &cfg).is_err());
}

#[test]
fn clustering_gold_links_recovers_generated_threads() {
    for seed in 0..20 {
        let s = synth_generate(&SynthConfig {
            n_utterances: 120,
            seed,
            ..Default::default()
        })
        .unwrap();
        let ids: Vec<u64> = s.dialogue.utterances().iter().map(|u| u.id).collect();
        let threads = Partition::from_labels(ids.iter().zip(&s.threads).map(|(&id, &t)| (id, t as u64))).unwrap();
        assert_eq!(cluster(&gold_predictions(&s.dialogue)).unwrap(), threads, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clusters_partition_every_id(parents in prop::collection::vec(0usize..100, 1..30)) {
        let preds: Vec<LinkPrediction> = parents
            .iter()
            .enumerate()
            .map(|(i, &p)| LinkPrediction { child: i as u64, parent: (p % (i + 1)) as u64, confidence: 0.5 })
            .collect();
        let part = cluster(&preds).unwrap();
        let mut seen = BTreeSet::new();
        for c in part.clusters() {
            for &id in c {
                prop_assert!(seen.insert(id));
            }
        }
        prop_assert_eq!(seen.len(), parents.len());
        prop_assert_eq!(links_of(&preds).unwrap().len(), parents.len());
    }
}
