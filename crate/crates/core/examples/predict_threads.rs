//! Predict reply-to links, cluster them into threads and score the result.
//!
//!     cargo run --release --example predict_threads -- [checkpoint]
//!
//! Without a checkpoint a small model is trained first.

use disentangle::corpus::{synth_generate, SynthConfig};
use disentangle::metrics::{cluster_links, evaluate_all};
use disentangle::model::{Model, ModelConfig};
use disentangle::pipeline::{cluster, links_of, predict, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = match std::env::args().nth(1) {
        Some(path) => Model::load(path.as_ref())?,
        None => {
            let cfg = ModelConfig {
                window: 20,
                hidden: 32,
                recurrent: 16,
                hash_buckets: 1024,
                ..Default::default()
            };
            let mut m = Model::new(cfg)?;
            let data = synth_generate(&SynthConfig {
                n_utterances: 600,
                seed: 1,
                ..Default::default()
            })?;
            let tc = TrainConfig {
                epochs: 4,
                window: cfg.window,
                ..Default::default()
            };
            train(&[data.dialogue], &mut m, &tc)?;
            m
        }
    };

    // A fresh dialogue the model has not seen.
    let test = synth_generate(&SynthConfig {
        n_utterances: 120,
        seed: 99,
        ..Default::default()
    })?;
    let d = test.dialogue.without_annotations();
    let preds = predict(&d, &model)?;
    for p in preds.iter().skip(40).take(8) {
        let u = &d.utterances()[d.position_of(p.child).unwrap()];
        println!("{:>3} -> {:>3} ({:.2})  {}: {}", p.child, p.parent, p.confidence, u.speaker, u.text);
    }

    let threads = cluster(&preds)?;
    let gold = test.dialogue.gold_links().unwrap();
    println!("\npredicted {} threads, gold {}", threads.len(), cluster_links(gold)?.len());
    let report = evaluate_all(&links_of(&preds)?, gold)?;
    print!("{report}");
    Ok(())
}
